//! Classical fixed-step fourth-order Runge–Kutta for small complex systems.

use num_complex::Complex64;

/// One RK4 step of `y' = f(t, y)` for a state of `N` complex components.
pub(crate) fn step<const N: usize, F>(t: f64, y: [Complex64; N], h: f64, f: F) -> [Complex64; N]
where
    F: Fn(f64, &[Complex64; N]) -> [Complex64; N],
{
    let axpy =
        |y: &[Complex64; N], k: &[Complex64; N], s: f64| -> [Complex64; N] { std::array::from_fn(|i| y[i] + k[i] * s) };
    let k1 = f(t, &y);
    let k2 = f(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(&y, &k3, h));
    std::array::from_fn(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
}
