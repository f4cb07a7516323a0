//! Homodyne demodulation and signal-to-noise ratio.
//!
//! A record is reduced to `M = ∫ K(t) α_out(t) dt` and read along the
//! quadrature `Re(e^{−iφ} M)`. With vacuum noise of unit spectral density the
//! amplitude SNR is
//!
//! ```text
//! SNR(τ) = √(2η) |Re(e^{−iφ} ∫₀^τ K Δα_out dt)| / √(∫₀^τ |K|² dt)
//! ```
//!
//! where `Δα_out = α_out,e − α_out,g`. For `K = Δα_out*` this is
//! `√(2η ∫|Δα_out|²)`, the largest value any envelope can reach.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::cavitydyn::ConditionalTrajectory;
use crate::quadrature;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Boxcar,
    Optimal,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemodEnvelope {
    pub dt: f64,
    pub weights: Vec<Complex64>,
    pub kind: EnvelopeKind,
}

impl DemodEnvelope {
    pub fn boxcar(n: usize, dt: f64) -> Self {
        DemodEnvelope { dt, weights: vec![Complex64::new(1.0, 0.0); n], kind: EnvelopeKind::Boxcar }
    }

    pub fn boxcar_for(traj: &ConditionalTrajectory) -> Self {
        Self::boxcar(traj.len(), traj.dt)
    }

    pub fn custom(dt: f64, weights: Vec<Complex64>) -> Self {
        DemodEnvelope { dt, weights, kind: EnvelopeKind::Custom }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Fails unless the envelope and trajectory share one grid.
    pub fn check_grid(&self, traj: &ConditionalTrajectory, op: &'static str) -> Result<()> {
        traj.check()?;
        if self.len() != traj.len() {
            return Err(Error::shape(op, format!("envelope has {} samples, trajectory {}", self.len(), traj.len())));
        }
        if (self.dt - traj.dt).abs() > 1e-9 * traj.dt {
            return Err(Error::shape(op, format!("envelope dt {} differs from trajectory dt {}", self.dt, traj.dt)));
        }
        Ok(())
    }

    /// Writes `t_s, re_k, im_k`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_s", "re_k", "im_k"])?;
        for (n, k) in self.weights.iter().enumerate() {
            w.write_record([(n as f64 * self.dt).to_string(), k.re.to_string(), k.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrCurve {
    pub tau: Vec<f64>,
    pub snr: Vec<f64>,
    pub label: String,
}

impl SnrCurve {
    /// Samples a closed form on the given times.
    pub fn from_formula(formula: SnrFormula, kappa: f64, eta: f64, tau: Vec<f64>) -> Self {
        let snr = tau.iter().map(|&t| eta.sqrt() * formula.eval(kappa, t)).collect();
        SnrCurve { tau, snr, label: formula.label().to_string() }
    }

    /// Writes `tau_s, snr`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tau_s", "snr"])?;
        for (t, s) in self.tau.iter().zip(&self.snr) {
            w.write_record([t.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, label: &str) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let (mut tau, mut snr) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("{}: bad value in column {i}", path.display())))
            };
            tau.push(parse(0)?);
            snr.push(parse(1)?);
        }
        Ok(SnrCurve { tau, snr, label: label.to_string() })
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::validation("eta", format!("must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

/// Integrated signal `∫ K·out dt` over the full window.
pub fn integrate_record(out: &[Complex64], env: &DemodEnvelope) -> Complex64 {
    let prod: Vec<Complex64> = env.weights.iter().zip(out).map(|(k, o)| k * o).collect();
    quadrature::integrate(&prod, env.dt)
}

/// Noise normalisation `∫ |K|² dt` over the full window.
pub fn envelope_norm(env: &DemodEnvelope) -> f64 {
    let sq: Vec<f64> = env.weights.iter().map(|k| k.norm_sqr()).collect();
    quadrature::integrate(&sq, env.dt)
}

/// Demodulation phase that puts the full-window signal on the read quadrature.
pub fn best_phase(traj: &ConditionalTrajectory, env: &DemodEnvelope) -> Result<f64> {
    env.check_grid(traj, "best_phase")?;
    Ok(integrate_record(&traj.out_difference(), env).arg())
}

/// SNR at every sample time of the trajectory.
///
/// `phi = None` selects the phase maximising the full-window signal.
pub fn snr_numeric(traj: &ConditionalTrajectory, env: &DemodEnvelope, phi: Option<f64>, eta: f64) -> Result<SnrCurve> {
    env.check_grid(traj, "snr_numeric")?;
    check_eta(eta)?;
    let diff = traj.out_difference();
    let signal: Vec<Complex64> = env.weights.iter().zip(&diff).map(|(k, d)| k * d).collect();
    let noise: Vec<f64> = env.weights.iter().map(|k| k.norm_sqr()).collect();
    let signal = quadrature::cumulative(&signal, traj.dt);
    let noise = quadrature::cumulative(&noise, traj.dt);
    let phi = phi.unwrap_or_else(|| signal.last().map_or(0.0, |s| s.arg()));
    let rot = Complex64::from_polar(1.0, -phi);
    let snr = signal
        .iter()
        .zip(&noise)
        .map(|(s, &n)| if n > 0.0 { (2.0 * eta).sqrt() * (rot * s).re.abs() / n.sqrt() } else { 0.0 })
        .collect();
    let label = match env.kind {
        EnvelopeKind::Boxcar => "numeric-boxcar",
        EnvelopeKind::Optimal => "numeric-optimal",
        EnvelopeKind::Custom => "numeric-custom",
    };
    Ok(SnrCurve { tau: traj.times().collect(), snr, label: label.into() })
}

/// Matched-filter envelope `K = (out_e − out_g)*`, scaled so `max|K| = 1`.
pub fn optimal_envelope(traj: &ConditionalTrajectory) -> Result<DemodEnvelope> {
    traj.check()?;
    let mut weights: Vec<Complex64> = traj.out_difference().iter().map(|d| d.conj()).collect();
    let peak = weights.iter().map(|k| k.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::domain("optimal_envelope", "branches are identical, envelope is degenerate"));
    }
    weights.iter_mut().for_each(|k| *k /= peak);
    Ok(DemodEnvelope { dt: traj.dt, weights, kind: EnvelopeKind::Optimal })
}

/// Analytic SNR curves at `η = 1` for constant drives from an empty cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "kebab-case")]
pub enum SnrFormula {
    DispersiveBoxcar { eps: f64, chi: f64 },
    DispersiveOptimal { eps: f64, chi: f64 },
    LongitudinalBoxcar { zeta: f64 },
    LongitudinalOptimal { zeta: f64 },
}

impl SnrFormula {
    pub fn eval(self, kappa: f64, tau: f64) -> f64 {
        match self {
            SnrFormula::DispersiveBoxcar { eps, chi } => snr_dispersive_boxcar(eps, chi, kappa, tau),
            SnrFormula::DispersiveOptimal { eps, chi } => snr_dispersive_optimal(eps, chi, kappa, tau),
            SnrFormula::LongitudinalBoxcar { zeta } => snr_longitudinal_boxcar(zeta, kappa, tau),
            SnrFormula::LongitudinalOptimal { zeta } => snr_longitudinal_optimal(zeta, kappa, tau),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SnrFormula::DispersiveBoxcar { .. } => "dispersive-boxcar",
            SnrFormula::DispersiveOptimal { .. } => "dispersive-optimal",
            SnrFormula::LongitudinalBoxcar { .. } => "longitudinal-boxcar",
            SnrFormula::LongitudinalOptimal { .. } => "longitudinal-optimal",
        }
    }
}

/// Below this `|λ|τ` the dispersive forms are summed as power series.
const SERIES_CUTOFF: f64 = 0.5;
const SERIES_TERMS: usize = 30;

/// `(λ₊, λ₋) = ((κ + iχ)/2, (κ − iχ)/2)`: decay constants of the e and g branches.
fn branch_rates(chi: f64, kappa: f64) -> (Complex64, Complex64) {
    (Complex64::new(0.5 * kappa, 0.5 * chi), Complex64::new(0.5 * kappa, -0.5 * chi))
}

/// Terms `u_n = c_n τⁿ` of `Δα(τ)/ε = Σ c_n τⁿ`.
fn dispersive_series(chi: f64, kappa: f64, tau: f64) -> Vec<Complex64> {
    let (lp, lm) = branch_rates(chi, kappa);
    let mut c = vec![Complex64::new(0.0, 0.0); SERIES_TERMS + 1];
    let (mut pp, mut pm) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let mut fact = 1.0;
    for (n, term) in c.iter_mut().enumerate().skip(1) {
        fact *= n as f64;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        *term = sign * (pp - pm) * tau / fact;
        pp *= lp * tau;
        pm *= lm * tau;
    }
    c
}

/// Dispersive readout with boxcar envelope read at phase `φ`.
pub fn snr_dispersive_boxcar_at_phase(eps: f64, chi: f64, kappa: f64, tau: f64, phi: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let (lp, _) = branch_rates(chi, kappa);
    // ∫₀^τ Δα dt = ε·2i Im g(λ₊),   g(λ) = τ/λ − (1 − e^{−λτ})/λ²
    let im_g = if lp.norm() * tau < SERIES_CUTOFF {
        let u = dispersive_series(chi, kappa, tau);
        tau * u.iter().enumerate().skip(1).map(|(n, un)| un.im / (n + 1) as f64).sum::<f64>() / 2.0
    } else {
        let phi_qb = (chi / kappa).atan();
        let x = kappa * tau;
        // printed form, with sin 2φ_qb multiplied through
        let s2 = (2.0 * phi_qb).sin();
        let bracket = s2 * (1.0 - 4.0 * phi_qb.cos().powi(2) / x)
            + 4.0 * phi_qb.cos().powi(2) / x * (2.0 * phi_qb + 0.5 * chi * tau).sin() * (-0.5 * x).exp();
        return (8.0f64).sqrt() * (eps / kappa).abs() * phi.sin().abs() * x.sqrt() * bracket.abs();
    };
    // SNR = √2 |ε| √κ |2 Im g| |sin φ| / √τ
    (2.0f64).sqrt() * eps.abs() * kappa.sqrt() * (2.0 * im_g).abs() * phi.sin().abs() / tau.sqrt()
}

/// Dispersive readout with boxcar envelope, information quadrature.
pub fn snr_dispersive_boxcar(eps: f64, chi: f64, kappa: f64, tau: f64) -> f64 {
    snr_dispersive_boxcar_at_phase(eps, chi, kappa, tau, std::f64::consts::FRAC_PI_2)
}

/// Dispersive readout with the matched-filter envelope.
pub fn snr_dispersive_optimal(eps: f64, chi: f64, kappa: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let (lp, _) = branch_rates(chi, kappa);
    // I = ∫₀^τ |Δα/ε|² dt
    let integral = if lp.norm() * tau < SERIES_CUTOFF {
        let u = dispersive_series(chi, kappa, tau);
        let mut acc = 0.0;
        for (m, um) in u.iter().enumerate().skip(2) {
            for (n, un) in u.iter().enumerate().skip(2) {
                acc += (um * un.conj()).re / (m + n + 1) as f64;
            }
        }
        tau * acc
    } else {
        // Δα/ε = 2i Im f(λ₊),   f(λ) = (1 − e^{−λt})/λ,   a = 1/λ₊
        let a = lp.inv();
        let one = Complex64::new(1.0, 0.0);
        let e1 = one - (-lp * tau).exp();
        let e2 = one - (-2.0 * lp * tau).exp();
        let im_f_sq = tau * a.im * a.im - 2.0 * a.im * (a * e1 / lp).im
            + 0.5 * a.norm_sqr() * (-(-kappa * tau).exp_m1()) / kappa
            - 0.5 * (a * a * e2 / (2.0 * lp)).re;
        4.0 * im_f_sq
    };
    (2.0 * kappa * integral.max(0.0)).sqrt() * eps.abs()
}

/// `x − 2(1 − e^{−x/2})`.
fn boxcar_core(x: f64) -> f64 {
    if x < 0.1 {
        let mut term = 1.0;
        let mut acc = 0.0;
        for n in 1..=20 {
            term *= -0.5 * x / n as f64;
            if n >= 2 {
                acc += 2.0 * term;
            }
        }
        acc
    } else {
        x + 2.0 * (-0.5 * x).exp_m1()
    }
}

/// `x − 4(1 − e^{−x/2}) + (1 − e^{−x})`.
fn optimal_core(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        let mut fact = 1.0;
        let mut acc = 0.0;
        for n in 1..=SERIES_TERMS {
            fact *= n as f64;
            if n >= 3 {
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                acc += sign * (1.0 - 2f64.powi(2 - n as i32)) * x.powi(n as i32) / fact;
            }
        }
        acc
    } else {
        x + 4.0 * (-0.5 * x).exp_m1() - (-x).exp_m1()
    }
}

/// Longitudinal readout with boxcar envelope.
pub fn snr_longitudinal_boxcar(zeta: f64, kappa: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let x = kappa * tau;
    (8.0f64).sqrt() * (zeta / kappa).abs() * boxcar_core(x) / x.sqrt()
}

/// Longitudinal readout with the matched-filter envelope.
pub fn snr_longitudinal_optimal(zeta: f64, kappa: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    (8.0f64).sqrt() * (zeta / kappa).abs() * optimal_core(kappa * tau).max(0.0).sqrt()
}

/// Least-squares slope of `ln snr` against `ln τ` inside `window`, with its
/// standard error.
pub fn fit_loglog_slope(curve: &SnrCurve, window: (f64, f64)) -> Result<(f64, f64)> {
    const OP: &str = "fit_loglog_slope";
    let pts: Vec<(f64, f64)> = curve
        .tau
        .iter()
        .zip(&curve.snr)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(&t, &s)| (t, s))
        .collect();
    if pts.len() < 10 {
        return Err(Error::domain(OP, format!("{} points in window, need at least 10", pts.len())));
    }
    if pts.iter().any(|&(t, s)| !(t > 0.0 && s > 0.0)) {
        return Err(Error::domain(OP, "non-positive values in window"));
    }
    let n = pts.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(t, s)| (t.ln(), s.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

/// `n` logarithmically spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
