//! Quadrature on uniform grids.
//!
//! Every integral in the crate (SNR signal and noise, dephasing exponents,
//! spliced single-shot integrals) goes through these weights so that the
//! different routes stay consistent with each other. The rule is exact for
//! cubics and all node weights are positive, so Cauchy–Schwarz holds exactly
//! on the discrete inner product.

use std::ops::{Add, Mul, Sub};

/// Node weights for integrating over `n_nodes` samples spaced by `dt`.
///
/// Uses trapezoid / Simpson / Simpson-3/8 for very short grids and the
/// fourth-order extended formula (end weights 3/8, 7/6, 23/24) otherwise.
/// The weights always sum to `(n_nodes - 1) * dt`.
pub fn node_weights(n_nodes: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![0.0; n_nodes];
    if n_nodes < 2 {
        return w;
    }
    let n = n_nodes - 1;
    match n {
        1 => w.copy_from_slice(&[0.5, 0.5]),
        2 => w.copy_from_slice(&[1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]),
        3 => w.copy_from_slice(&[3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0]),
        4 => w.copy_from_slice(&[1.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]),
        _ => {
            w.iter_mut().for_each(|x| *x = 1.0);
            for (i, c) in [(0, -5.0 / 8.0), (1, 1.0 / 6.0), (2, -1.0 / 24.0)] {
                w[i] += c;
                w[n - i] += c;
            }
        }
    }
    w.iter_mut().for_each(|x| *x *= dt);
    w
}

/// Integral of `f` over the whole grid.
pub fn integrate<T>(f: &[T], dt: f64) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    node_weights(f.len(), dt).iter().zip(f).fold(T::default(), |acc, (&w, &y)| acc + y * w)
}

/// Running integral `∫_0^{t_n} f dt` for every node `n`.
///
/// Each entry uses the same rule as [`node_weights`] restricted to nodes
/// `0..=n`, so `cumulative(f)[n] == integrate(&f[..=n])` up to rounding.
pub fn cumulative<T>(f: &[T], dt: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let mut prefix = Vec::with_capacity(f.len());
    let mut acc = T::default();
    for &y in f {
        acc = acc + y;
        prefix.push(acc);
    }
    (0..f.len())
        .map(|n| match n {
            0..=4 => integrate(&f[..=n], dt),
            _ => {
                let ends =
                    (f[0] + f[n]) * (-5.0 / 8.0) + (f[1] + f[n - 1]) * (1.0 / 6.0) + (f[2] + f[n - 2]) * (-1.0 / 24.0);
                (prefix[n] + ends) * dt
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_cubics_on_every_grid_length() {
        for n_nodes in 2..40 {
            let dt = 0.37;
            let f: Vec<f64> = (0..n_nodes)
                .map(|i| {
                    let t = i as f64 * dt;
                    1.0 - 2.0 * t + 0.5 * t * t + 0.25 * t * t * t
                })
                .collect();
            let t = (n_nodes - 1) as f64 * dt;
            let exact = t - t * t + t.powi(3) / 6.0 + t.powi(4) / 16.0;
            if n_nodes >= 3 {
                assert_relative_eq!(integrate(&f, dt), exact, max_relative = 1e-12);
            }
            let cum = cumulative(&f, dt);
            assert_relative_eq!(cum[n_nodes - 1], integrate(&f, dt), max_relative = 1e-12);
        }
    }

    #[test]
    fn weights_positive_and_sum_to_span() {
        for n_nodes in 2..30 {
            let w = node_weights(n_nodes, 0.1);
            assert!(w.iter().all(|&x| x > 0.0));
            assert_relative_eq!(w.iter().sum::<f64>(), (n_nodes - 1) as f64 * 0.1, max_relative = 1e-13);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).exp()).collect();
            (integrate(&f, dt) - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(40) / err(80);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
