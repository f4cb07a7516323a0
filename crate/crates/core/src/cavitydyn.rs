//! Conditional coherent-state trajectories of the readout cavity.
//!
//! For each qubit state `σ ∈ {−1, +1}` the cavity amplitude obeys
//!
//! ```text
//! α̇ = −i(χ/2)σ α − i(ζ(t)/2)σ − (κ/2) α + ε
//! α_out = α_in + √κ α,        α_in = −ε/√κ
//! ```
//!
//! Pure dispersive readout has `ζ = 0`, pure longitudinal readout has
//! `χ = ε = 0`. Both are integrated by RK4 on a fixed grid with `ζ` held
//! constant over each step, so `M` coupling samples give `M + 1` trajectory
//! samples starting at `t = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::rk4;
use crate::{Error, Result};

/// Largest allowed `dt·κ`.
pub const MAX_DT_KAPPA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitState {
    G,
    E,
}

impl QubitState {
    pub fn sigma_z(self) -> f64 {
        match self {
            QubitState::G => -1.0,
            QubitState::E => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitState::G => "g",
            QubitState::E => "e",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Dispersive,
    Longitudinal,
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTrajectory {
    pub dt: f64,
    pub kappa: f64,
    pub alpha_g: Vec<Complex64>,
    pub alpha_e: Vec<Complex64>,
    pub out_g: Vec<Complex64>,
    pub out_e: Vec<Complex64>,
    pub mode: CouplingMode,
    /// Input field `α_in`, identical for both branches.
    pub input: Complex64,
}

impl ConditionalTrajectory {
    pub fn len(&self) -> usize {
        self.alpha_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_g.is_empty()
    }

    /// Time of the last sample.
    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |n| n as f64 * self.dt)
    }

    pub fn alpha(&self, state: QubitState) -> &[Complex64] {
        match state {
            QubitState::G => &self.alpha_g,
            QubitState::E => &self.alpha_e,
        }
    }

    pub fn out(&self, state: QubitState) -> &[Complex64] {
        match state {
            QubitState::G => &self.out_g,
            QubitState::E => &self.out_e,
        }
    }

    /// `out_e − out_g` per sample.
    pub fn out_difference(&self) -> Vec<Complex64> {
        self.out_e.iter().zip(&self.out_g).map(|(e, g)| e - g).collect()
    }

    /// `|α_e − α_g|` per sample.
    pub fn separation(&self) -> Vec<f64> {
        self.alpha_e.iter().zip(&self.alpha_g).map(|(e, g)| (e - g).norm()).collect()
    }

    /// Keeps the first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        ConditionalTrajectory {
            alpha_g: self.alpha_g[..n].to_vec(),
            alpha_e: self.alpha_e[..n].to_vec(),
            out_g: self.out_g[..n].to_vec(),
            out_e: self.out_e[..n].to_vec(),
            ..self.clone()
        }
    }

    /// Checks the shared-grid invariant.
    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if [self.alpha_e.len(), self.out_g.len(), self.out_e.len()].iter().any(|&m| m != n) {
            return Err(Error::shape("trajectory", "branch sequences differ in length"));
        }
        if n == 0 {
            return Err(Error::shape("trajectory", "trajectory is empty"));
        }
        Ok(())
    }

    /// Writes `t_s` followed by real and imaginary parts of `α_g, α_e, out_g, out_e`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "t_s",
            "re_alpha_g",
            "im_alpha_g",
            "re_alpha_e",
            "im_alpha_e",
            "re_out_g",
            "im_out_g",
            "re_out_e",
            "im_out_e",
        ])?;
        for (n, t) in self.times().enumerate() {
            let mut row = vec![t.to_string()];
            for z in [self.alpha_g[n], self.alpha_e[n], self.out_g[n], self.out_e[n]] {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(kappa: f64, dt: f64, op: &'static str) -> Result<()> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::validation("kappa", format!("must be > 0, got {kappa}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be > 0, got {dt}")));
    }
    if dt * kappa > MAX_DT_KAPPA {
        return Err(Error::resolution(op, format!("dt·κ = {:.3} > {MAX_DT_KAPPA}", dt * kappa)));
    }
    Ok(())
}

struct Drive<'a> {
    eps: Complex64,
    chi: f64,
    zeta: &'a [Complex64],
    kappa: f64,
    dt: f64,
}

fn integrate_branch(d: &Drive, sigma: f64, alpha0: Complex64) -> Vec<Complex64> {
    let i = Complex64::i();
    let decay = Complex64::new(0.5 * d.kappa, 0.5 * d.chi * sigma);
    let mut y = [alpha0];
    let mut out = Vec::with_capacity(d.zeta.len() + 1);
    out.push(alpha0);
    for (n, &z) in d.zeta.iter().enumerate() {
        let source = d.eps - i * 0.5 * sigma * z;
        y = rk4::step(n as f64 * d.dt, y, d.dt, |_, a| [source - decay * a[0]]);
        out.push(y[0]);
    }
    out
}

fn build(d: &Drive, mode: CouplingMode, alpha0_e: Complex64, alpha0_g: Complex64) -> ConditionalTrajectory {
    let alpha_g = integrate_branch(d, QubitState::G.sigma_z(), alpha0_g);
    let alpha_e = integrate_branch(d, QubitState::E.sigma_z(), alpha0_e);
    let sqrt_k = d.kappa.sqrt();
    let input = -d.eps / sqrt_k;
    let out = |a: &[Complex64]| a.iter().map(|a| input + a * sqrt_k).collect();
    ConditionalTrajectory {
        dt: d.dt,
        kappa: d.kappa,
        out_g: out(&alpha_g),
        out_e: out(&alpha_e),
        alpha_g,
        alpha_e,
        mode,
        input,
    }
}

fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::validation("duration", format!("must be ≥ 0, got {duration}")));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-6 * dt.max(duration) {
        return Err(Error::validation("duration", format!("{duration} s is not a multiple of dt = {dt} s")));
    }
    Ok(n as usize)
}

/// Dispersive readout driven at constant real or complex amplitude `ε`.
pub fn evolve_dispersive(
    eps: impl Into<Complex64>,
    chi: f64,
    kappa: f64,
    duration: f64,
    dt: f64,
) -> Result<ConditionalTrajectory> {
    check_grid(kappa, dt, "evolve_dispersive")?;
    let zeta = vec![Complex64::new(0.0, 0.0); steps_for(duration, dt)?];
    let d = Drive { eps: eps.into(), chi, zeta: &zeta, kappa, dt };
    Ok(build(&d, CouplingMode::Dispersive, 0.0.into(), 0.0.into()))
}

/// Longitudinal readout from an empty cavity, `ζ` held over each step.
pub fn evolve_longitudinal(zeta: &[Complex64], kappa: f64, dt: f64) -> Result<ConditionalTrajectory> {
    evolve_longitudinal_from(Complex64::new(0.0, 0.0), zeta, kappa, dt)
}

/// Longitudinal readout starting from `α_e(0) = alpha0_e`, `α_g(0) = −alpha0_e`.
pub fn evolve_longitudinal_from(
    alpha0_e: Complex64,
    zeta: &[Complex64],
    kappa: f64,
    dt: f64,
) -> Result<ConditionalTrajectory> {
    check_grid(kappa, dt, "evolve_longitudinal")?;
    let d = Drive { eps: 0.0.into(), chi: 0.0, zeta, kappa, dt };
    Ok(build(&d, CouplingMode::Longitudinal, alpha0_e, -alpha0_e))
}

/// Both couplings at once plus a constant cavity drive `ε`.
pub fn evolve_combined(
    eps: impl Into<Complex64>,
    zeta: &[Complex64],
    chi: f64,
    kappa: f64,
    dt: f64,
) -> Result<ConditionalTrajectory> {
    check_grid(kappa, dt, "evolve_combined")?;
    let d = Drive { eps: eps.into(), chi, zeta, kappa, dt };
    Ok(build(&d, CouplingMode::Combined, 0.0.into(), 0.0.into()))
}

/// `α(t)` for constant dispersive drive from an empty cavity.
pub fn dispersive_closed_form(eps: Complex64, chi: f64, kappa: f64, sigma: f64, t: f64) -> Complex64 {
    let lambda = Complex64::new(0.5 * kappa, 0.5 * chi * sigma);
    // (1 − e^{−λt})/λ without cancellation at small λt
    let z = -lambda * t;
    let phi1 = if z.norm() < 1e-3 {
        t * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (Complex64::new(1.0, 0.0) - z.exp()) / lambda
    };
    eps * phi1
}

/// `α(t)` for constant longitudinal coupling starting from `alpha0`.
pub fn longitudinal_closed_form(zeta: Complex64, kappa: f64, sigma: f64, t: f64, alpha0: Complex64) -> Complex64 {
    let fixed = -Complex64::i() * sigma * zeta / kappa;
    fixed * -(-0.5 * kappa * t).exp_m1() + alpha0 * (-0.5 * kappa * t).exp()
}

/// Time after which a reversed coupling `multiplier·ζ₀` empties the cavity.
///
/// `alpha0_e` is the e-branch amplitude when the reversal starts; the g
/// branch mirrors it and crosses zero at the same instant.
pub fn design_depletion(alpha0_e: Complex64, zeta0: f64, multiplier: f64, kappa: f64) -> Result<f64> {
    const OP: &str = "design_depletion";
    if !(kappa > 0.0) {
        return Err(Error::validation("kappa", format!("must be > 0, got {kappa}")));
    }
    if !(multiplier < 0.0) {
        return Err(Error::validation("multiplier", format!("must be < 0 for a reversal, got {multiplier}")));
    }
    if alpha0_e.norm() < 1e-12 {
        return Err(Error::domain(OP, "cavity is already empty"));
    }
    let target = -Complex64::i() * multiplier * zeta0 / kappa;
    let denom = target - alpha0_e;
    if denom.norm() == 0.0 {
        return Err(Error::domain(OP, "amplitude already sits at the reversed fixed point"));
    }
    let r = target / denom;
    if r.im.abs() > 1e-6 * r.norm() || !(r.re > 0.0 && r.re < 1.0) {
        return Err(Error::domain(OP, format!("amplitude never crosses zero (decay ratio {r})")));
    }
    Ok(-2.0 / kappa * r.re.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::hz_to_rad;
    use approx::assert_relative_eq;

    const KAPPA: f64 = 1e7;
    const DT: f64 = 1e-9;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        if b.norm() == 0.0 {
            a.norm()
        } else {
            (a - b).norm() / b.norm()
        }
    }

    #[test]
    fn sigma_convention() {
        assert_eq!(QubitState::E.sigma_z(), 1.0);
        assert_eq!(QubitState::G.sigma_z(), -1.0);
    }

    #[test]
    fn dispersive_matches_closed_form() {
        let eps = 0.3 * KAPPA;
        let traj = evolve_dispersive(eps, KAPPA, KAPPA, 2e-6, DT).unwrap();
        assert_eq!(traj.len(), 2001);
        for (n, t) in traj.times().enumerate() {
            for s in [QubitState::G, QubitState::E] {
                let exact = dispersive_closed_form(c(eps), KAPPA, KAPPA, s.sigma_z(), t);
                assert!(rel(traj.alpha(s)[n], exact) < 1e-9, "n = {n}");
            }
        }
    }

    #[test]
    fn dispersive_steady_state_phase() {
        let eps = 0.3 * KAPPA;
        let traj = evolve_dispersive(eps, KAPPA, KAPPA, 5e-6, DT).unwrap();
        let (g, e) = (traj.alpha_g[5000], traj.alpha_e[5000]);
        let expected = 2f64.sqrt() * eps / KAPPA;
        assert_relative_eq!(g.norm(), expected, max_relative = 1e-9);
        assert_relative_eq!(e.norm(), expected, max_relative = 1e-9);
        let dphi = (g / e).arg();
        assert_relative_eq!(dphi, std::f64::consts::FRAC_PI_2, max_relative = 1e-9);
    }

    #[test]
    fn dispersive_degenerate_cases() {
        let zero = evolve_dispersive(0.0, KAPPA, KAPPA, 1e-7, DT).unwrap();
        assert!(zero.alpha_e.iter().chain(&zero.out_g).all(|a| a.norm() == 0.0));
        let sym = evolve_dispersive(1e6, 0.0, KAPPA, 1e-7, DT).unwrap();
        assert_eq!(sym.alpha_g, sym.alpha_e);
    }

    #[test]
    fn input_output_relation() {
        let eps = 2e6;
        let traj = evolve_dispersive(eps, 3e6, KAPPA, 1e-7, DT).unwrap();
        for (a, o) in traj.alpha_e.iter().zip(&traj.out_e) {
            assert!((o - a * KAPPA.sqrt() - c(-eps / KAPPA.sqrt())).norm() < 1e-9);
        }
    }

    #[test]
    fn longitudinal_matches_closed_form_and_is_antisymmetric() {
        let zeta = c(hz_to_rad(1.28e6));
        let traj = evolve_longitudinal(&vec![zeta; 1500], KAPPA, DT).unwrap();
        for (n, t) in traj.times().enumerate() {
            let exact = longitudinal_closed_form(zeta, KAPPA, 1.0, t, c(0.0));
            assert!(rel(traj.alpha_e[n], exact) < 1e-9, "n = {n}");
            assert_eq!(traj.alpha_g[n], -traj.alpha_e[n]);
            assert_eq!(traj.out_e[n], traj.alpha_e[n] * KAPPA.sqrt());
        }
    }

    #[test]
    fn longitudinal_steady_state_photons() {
        let zeta = hz_to_rad(1.28e6);
        let traj = evolve_longitudinal(&vec![c(zeta); 4000], KAPPA, DT).unwrap();
        let a = traj.alpha_e[4000];
        assert_relative_eq!(a.norm(), 0.80425, max_relative = 1e-4);
        // e-branch sits at −i ζ/κ
        assert!(a.re.abs() < 1e-12 && a.im < 0.0);
        let sep = (traj.alpha_e[4000] - traj.alpha_g[4000]).norm();
        assert_relative_eq!(sep * sep, 2.58726, max_relative = 1e-4);
    }

    #[test]
    fn combined_reduces_to_pure_cases() {
        let zeta = vec![c(1e6); 300];
        let pure = evolve_longitudinal(&zeta, KAPPA, DT).unwrap();
        let mixed = evolve_combined(0.0, &zeta, 0.0, KAPPA, DT).unwrap();
        assert_eq!(pure.alpha_e, mixed.alpha_e);
        let disp = evolve_dispersive(2e6, KAPPA, KAPPA, 300e-9, DT).unwrap();
        let mixed = evolve_combined(2e6, &vec![c(0.0); 300], KAPPA, KAPPA, DT).unwrap();
        assert_eq!(disp.alpha_e, mixed.alpha_e);
        assert_eq!(disp.out_g, mixed.out_g);
    }

    #[test]
    fn weak_dispersive_barely_distorts_displacement() {
        let zeta = vec![c(hz_to_rad(1.28e6)); 750];
        let pure = evolve_longitudinal(&zeta, KAPPA, DT).unwrap();
        let mixed = evolve_combined(0.0, &zeta, KAPPA / 16.0, KAPPA, DT).unwrap();
        let (sp, sm) = (pure.separation()[750], mixed.separation()[750]);
        assert!((sm - sp).abs() < 0.01 * sp);
        // pure displacement is along Im α; the weak χ only adds a small Re part
        let a = mixed.alpha_e[750];
        assert!(a.re.abs() <= a.norm() / 16.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(evolve_dispersive(1.0, 0.0, KAPPA, 1e-6, 1e-8), Err(Error::Resolution { .. })));
        assert!(matches!(evolve_longitudinal(&[c(1.0)], -1.0, DT), Err(Error::Validation { .. })));
        assert!(evolve_dispersive(1.0, 0.0, KAPPA, 1.5e-9, DT).is_err());
    }

    #[test]
    fn depletion_times() {
        let zeta0 = hz_to_rad(1.28e6);
        let steady = -Complex64::i() * zeta0 / KAPPA;
        let t = design_depletion(steady, zeta0, -2.0, KAPPA).unwrap();
        assert_relative_eq!(t, 2.0 / KAPPA * 1.5f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(t, 81.093e-9, max_relative = 1e-4);
        let t1 = design_depletion(steady, zeta0, -1.0, KAPPA).unwrap();
        assert_relative_eq!(t1, 2.0 / KAPPA * 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn depletion_rejections() {
        assert!(matches!(design_depletion(c(0.0), 1e6, -2.0, KAPPA), Err(Error::Domain { .. })));
        assert!(design_depletion(c(0.1), 1e6, 2.0, KAPPA).is_err());
        // amplitude on the wrong side of the origin never crosses
        let wrong = Complex64::i() * 0.5;
        assert!(matches!(design_depletion(wrong, 1e6, -2.0, KAPPA), Err(Error::Domain { .. })));
    }

    #[test]
    fn depletion_empties_cavity() {
        let zeta0 = hz_to_rad(1.28e6);
        let ring = evolve_longitudinal(&vec![c(zeta0); 750], KAPPA, DT).unwrap();
        let a0 = ring.alpha_e[750];
        let t = design_depletion(a0, zeta0, -2.0, KAPPA).unwrap();
        let n = 200;
        let dep = evolve_longitudinal_from(a0, &vec![c(-2.0 * zeta0); n], KAPPA, t / n as f64).unwrap();
        assert!(dep.alpha_e[n].norm() < 1e-9 * a0.norm());
        assert!(dep.alpha_g[n].norm() < 1e-9 * a0.norm());
    }
}
