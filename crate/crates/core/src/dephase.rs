//! Measurement-induced dephasing of the measured qubit and of spectators.
//!
//! The measured qubit loses coherence as `|ρ_ge(τ)| = e^{−γ_m}|ρ_ge(0)|` with
//! `γ_m = (κ/2)∫|α_g − α_e|² dt`, and an ideal matched filter recovers
//! `SNR² = 4γ_m`; their ratio defines the efficiency `η`.
//!
//! A spectator qubit with dispersive shift `χ_s` accumulates the phase
//! `χ_s ∫ n(t) s(t) dt`, with `s(t) = ±1` the echo toggling function. The
//! photon number fluctuates around its mean as an Ornstein–Uhlenbeck process
//! with variance `n̄(t)` and correlation `e^{−κ|Δt|}`, which reproduces
//! `Γ_d = n̄ χ_s²/κ` for a long steady drive without echoes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::cavitydyn::{evolve_combined, ConditionalTrajectory, QubitState};
use crate::demod::{integrate_record, optimal_envelope, snr_numeric, DemodEnvelope};
use crate::quadrature;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingResult {
    pub gamma_m: f64,
    /// Matched-filter SNR of the same trajectory at the supplied `η`.
    pub snr_ref: f64,
    /// `snr_ref²/(4γ_m)`; absent when the branches coincide.
    pub eta_inferred: Option<f64>,
}

pub fn measurement_dephasing(traj: &ConditionalTrajectory, eta: f64) -> Result<DephasingResult> {
    traj.check()?;
    let sq: Vec<f64> = traj.alpha_g.iter().zip(&traj.alpha_e).map(|(g, e)| (g - e).norm_sqr()).collect();
    let gamma_m = 0.5 * traj.kappa * quadrature::integrate(&sq, traj.dt);
    let snr_ref = match optimal_envelope(traj) {
        Ok(env) => *snr_numeric(traj, &env, None, eta)?.snr.last().expect("non-empty"),
        Err(_) => 0.0,
    };
    let eta_inferred = (gamma_m > 0.0).then(|| snr_ref * snr_ref / (4.0 * gamma_m));
    Ok(DephasingResult { gamma_m, snr_ref, eta_inferred })
}

/// Ramsey contrast and SNR against readout drive amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationData {
    /// `(amplitude, contrast)`.
    pub ramsey: Vec<(f64, f64)>,
    /// `(amplitude, snr)`.
    pub snr: Vec<(f64, f64)>,
}

/// Forward model of the calibration: at amplitude `A` the dephasing is
/// `A² γ_m(1)` and the SNR is `A √η · 2√γ_m(1)`, perturbed by seeded
/// relative noise of size `rel_noise`.
pub fn synthesize_calibration(
    gamma_unit: f64,
    eta: f64,
    amps: &[f64],
    baseline: f64,
    rel_noise: f64,
    seed: u64,
) -> CalibrationData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |x: f64| x * (1.0 + rel_noise * rng.sample::<f64, _>(StandardNormal));
    let ramsey = amps.iter().map(|&a| (a, noise(baseline * (-a * a * gamma_unit).exp()))).collect();
    let snr = amps.iter().map(|&a| (a, noise(a * eta.sqrt() * 2.0 * gamma_unit.sqrt()))).collect();
    CalibrationData { ramsey, snr }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFit {
    pub eta: f64,
    /// Gaussian width of the contrast in amplitude units.
    pub sigma_d: f64,
    /// SNR per unit amplitude.
    pub slope_a: f64,
    pub r2_contrast: f64,
    pub r2_snr: f64,
}

const MIN_R2: f64 = 0.95;

fn r_squared(y: &[f64], fitted: impl Iterator<Item = f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = y.iter().zip(fitted).map(|(v, f)| (v - f).powi(2)).sum();
    if tss > 0.0 {
        1.0 - rss / tss
    } else {
        1.0
    }
}

/// Fits `contrast = c₀ exp(−A²/(2σ_D²))` and `SNR = a·A`; returns
/// `η = σ_D² a²/2`.
pub fn extract_efficiency(data: &CalibrationData) -> Result<EfficiencyFit> {
    const OP: &str = "extract_efficiency";
    if data.ramsey.len() < 5 || data.snr.len() < 5 {
        return Err(Error::validation("calibration", "need at least 5 points in each series"));
    }
    if data.ramsey.iter().any(|&(_, c)| !(c > 0.0)) {
        return Err(Error::validation("calibration", "contrasts must be positive"));
    }
    // ln c = b + s·A²
    let x: Vec<f64> = data.ramsey.iter().map(|(a, _)| a * a).collect();
    let y: Vec<f64> = data.ramsey.iter().map(|(_, c)| c.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::validation("calibration", "ramsey amplitudes are all equal"));
    }
    let s = sxy / sxx;
    let b = my - s * mx;
    if !(s < 0.0) {
        return Err(Error::fit(OP, "contrast does not decay with amplitude"));
    }
    let r2_contrast = r_squared(&y, x.iter().map(|v| b + s * v));
    if r2_contrast < MIN_R2 {
        return Err(Error::fit(OP, format!("contrast fit R² = {r2_contrast:.3}")));
    }
    let sigma_d = (-1.0 / (2.0 * s)).sqrt();

    let saa: f64 = data.snr.iter().map(|(a, _)| a * a).sum();
    let say: f64 = data.snr.iter().map(|(a, v)| a * v).sum();
    if saa == 0.0 {
        return Err(Error::validation("calibration", "snr amplitudes are all zero"));
    }
    let slope_a = say / saa;
    let ys: Vec<f64> = data.snr.iter().map(|(_, v)| *v).collect();
    let r2_snr = r_squared(&ys, data.snr.iter().map(|(a, _)| slope_a * a));
    if r2_snr < MIN_R2 {
        return Err(Error::fit(OP, format!("SNR is not linear in amplitude, R² = {r2_snr:.3}")));
    }
    Ok(EfficiencyFit { eta: sigma_d * sigma_d * slope_a * slope_a / 2.0, sigma_d, slope_a, r2_contrast, r2_snr })
}

#[derive(Clone, Debug)]
pub struct SpectatorConfig {
    pub chi_spectator: f64,
    pub n_echo: usize,
    pub sequence_length: f64,
    pub measurement_on: bool,
    /// Readout of the target qubit; its photons dephase the spectator.
    pub traj: ConditionalTrajectory,
    /// Start of the readout inside the sequence; `None` centres it.
    pub measurement_start: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectatorResult {
    pub n_echo: usize,
    /// Monte Carlo `|E e^{iφ}|` with measurement on over the same without.
    pub contrast_ratio: f64,
    pub stderr: f64,
    /// Gaussian-phase prediction of the same ratio.
    pub analytic_ratio: f64,
    /// Deterministic phase of the target-ensemble mean photon number.
    pub stark_phase: f64,
}

/// Spectator phase weights on the readout grid.
struct PhaseModel {
    /// `χ_s w_n s_n` for each sample.
    weight: Vec<f64>,
    /// `n̄_σ` per sample for σ = g, e.
    nbar: [Vec<f64>; 2],
    rho: f64,
}

/// `s(t)` for π pulses at `T(k − ½)/N`; a sample landing on a pulse takes
/// the mean of both sides, 0.
fn toggling(t: f64, n_echo: usize, length: f64) -> f64 {
    if n_echo == 0 {
        return 1.0;
    }
    let x = t / length * n_echo as f64 + 0.5;
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 && nearest >= 1.0 && nearest <= n_echo as f64 {
        return 0.0;
    }
    let flips = (x.floor().max(0.0) as usize).min(n_echo);
    if flips.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn phase_model(cfg: &SpectatorConfig) -> Result<PhaseModel> {
    const OP: &str = "spectator_dephasing";
    cfg.traj.check()?;
    if !(cfg.sequence_length > 0.0) {
        return Err(Error::validation("sequence_length", "must be > 0"));
    }
    let dt = cfg.traj.dt;
    let span = cfg.traj.duration();
    if span > cfg.sequence_length * (1.0 + 1e-12) {
        return Err(Error::validation("sequence_length", "shorter than the readout"));
    }
    let start = cfg.measurement_start.unwrap_or((0.5 * (cfg.sequence_length - span)).max(0.0));
    if start < 0.0 || start + span > cfg.sequence_length * (1.0 + 1e-12) {
        return Err(Error::validation("measurement_start", "readout must fit inside the sequence"));
    }
    if cfg.n_echo > 0 && cfg.sequence_length / (cfg.n_echo as f64) < 10.0 * dt {
        return Err(Error::resolution(OP, format!("echo spacing below 10·dt for N = {}", cfg.n_echo)));
    }
    let w = quadrature::node_weights(cfg.traj.len(), dt);
    let weight = w
        .iter()
        .enumerate()
        .map(|(n, w)| cfg.chi_spectator * w * toggling(start + n as f64 * dt, cfg.n_echo, cfg.sequence_length))
        .collect();
    let photons = |a: &[Complex64]| a.iter().map(|a| a.norm_sqr()).collect();
    Ok(PhaseModel {
        weight,
        nbar: [photons(&cfg.traj.alpha_g), photons(&cfg.traj.alpha_e)],
        rho: (-cfg.traj.kappa * dt).exp(),
    })
}

impl PhaseModel {
    fn mean_phase(&self, b: usize) -> f64 {
        self.weight.iter().zip(&self.nbar[b]).map(|(w, n)| w * n).sum()
    }

    /// Variance of the fluctuating phase, `Σ u_i u_j ρ^{|i−j|}` in O(N).
    fn phase_variance(&self, b: usize) -> f64 {
        let mut acc = 0.0;
        let mut tail = 0.0;
        let mut prev = 0.0;
        for (w, n) in self.weight.iter().zip(&self.nbar[b]) {
            let u = w * n.sqrt();
            tail = self.rho * (tail + prev);
            acc += u * u + 2.0 * u * tail;
            prev = u;
        }
        acc
    }

    fn sample_phase(&self, rng: &mut ChaCha8Rng) -> f64 {
        let b = usize::from(rng.random::<bool>());
        let kick = (1.0 - self.rho * self.rho).sqrt();
        let mut x: f64 = rng.sample(StandardNormal);
        let mut phi = 0.0;
        for (k, (w, n)) in self.weight.iter().zip(&self.nbar[b]).enumerate() {
            if k > 0 {
                x = self.rho * x + kick * rng.sample::<f64, _>(StandardNormal);
            }
            phi += w * (n + n.sqrt() * x);
        }
        phi
    }
}

/// Deterministic spectator phase from the ensemble-mean photon number.
pub fn stark_phase(cfg: &SpectatorConfig) -> Result<f64> {
    let m = phase_model(cfg)?;
    Ok(0.5 * (m.mean_phase(0) + m.mean_phase(1)))
}

pub fn spectator_dephasing(cfg: &SpectatorConfig) -> Result<SpectatorResult> {
    let model = phase_model(cfg)?;
    if !cfg.measurement_on {
        return Ok(SpectatorResult {
            n_echo: cfg.n_echo,
            contrast_ratio: 1.0,
            stderr: 0.0,
            analytic_ratio: 1.0,
            stark_phase: 0.0,
        });
    }
    if cfg.n_samples < 2 {
        return Err(Error::validation("n_samples", "need at least 2 Monte Carlo samples"));
    }
    let analytic: Complex64 =
        (0..2).map(|b| Complex64::from_polar((-0.5 * model.phase_variance(b)).exp(), model.mean_phase(b)) * 0.5).sum();
    let phasors: Vec<Complex64> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            Complex64::from_polar(1.0, model.sample_phase(&mut rng))
        })
        .collect();
    let m = cfg.n_samples as f64;
    let mean: Complex64 = phasors.iter().sum::<Complex64>() / m;
    let dir = Complex64::from_polar(1.0, -mean.arg());
    let proj: Vec<f64> = phasors.iter().map(|p| (p * dir).re).collect();
    let pm = proj.iter().sum::<f64>() / m;
    let var = proj.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(SpectatorResult {
        n_echo: cfg.n_echo,
        contrast_ratio: mean.norm(),
        stderr: (var / m).sqrt(),
        analytic_ratio: analytic.norm(),
        stark_phase: 0.5 * (model.mean_phase(0) + model.mean_phase(1)),
    })
}

/// Readout whose drive port also leaks into the cavity.
#[derive(Clone, Debug)]
pub struct CancellationSetup {
    /// Leakage field per unit readout drive.
    pub leakage: Complex64,
    /// Cavity drive (rad/s) produced by unit leakage.
    pub drive_eps: f64,
    pub zeta: Vec<Complex64>,
    pub chi: f64,
    pub kappa: f64,
    pub dt: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationResult {
    pub best_amp: f64,
    pub best_phase: f64,
    pub amps: Vec<f64>,
    pub phases: Vec<f64>,
    /// `|Ī_g + Ī_e|` in noise units, indexed `[amp][phase]`.
    pub residual: Vec<Vec<f64>>,
    pub on_boundary: bool,
}

impl CancellationResult {
    /// Writes `amp, phase, residual`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["amp", "phase", "residual"])?;
        for (a, row) in self.amps.iter().zip(&self.residual) {
            for (p, r) in self.phases.iter().zip(row) {
                w.write_record([a.to_string(), p.to_string(), r.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Sweeps a cancellation tone `amp·e^{i·phase}` (per unit drive) and records
/// how far the summed integrated signals of both qubit states are from zero.
pub fn tune_cancellation(setup: &CancellationSetup, amps: &[f64], phases: &[f64]) -> Result<CancellationResult> {
    const OP: &str = "tune_cancellation";
    if amps.is_empty() || phases.is_empty() {
        return Err(Error::validation("grid", "amplitude and phase grids must be non-empty"));
    }
    let clean = evolve_combined(0.0, &setup.zeta, setup.chi, setup.kappa, setup.dt)?;
    let env = match optimal_envelope(&clean) {
        Ok(e) => e,
        Err(_) => DemodEnvelope::boxcar_for(&clean),
    };
    let norm: f64 = crate::demod::envelope_norm(&env);
    if norm <= 0.0 {
        return Err(Error::domain(OP, "demodulation envelope is zero"));
    }
    let scale = 2.0 * setup.eta.sqrt() / norm.sqrt();
    let residual_at = |amp: f64, phase: f64| -> Result<f64> {
        let spurious = (setup.leakage + Complex64::from_polar(amp, phase)) * setup.drive_eps;
        let traj = evolve_combined(spurious, &setup.zeta, setup.chi, setup.kappa, setup.dt)?;
        let sum = integrate_record(traj.out(QubitState::G), &env) + integrate_record(traj.out(QubitState::E), &env);
        Ok(scale * sum.norm())
    };
    let residual = amps
        .par_iter()
        .map(|&a| phases.iter().map(|&p| residual_at(a, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let (mut ia, mut ip) = (0, 0);
    for (a, row) in residual.iter().enumerate() {
        for (p, r) in row.iter().enumerate() {
            if *r < residual[ia][ip] {
                (ia, ip) = (a, p);
            }
        }
    }
    let on_boundary = (amps.len() > 1 && (ia == 0 || ia == amps.len() - 1))
        || (phases.len() > 1 && (ip == 0 || ip == phases.len() - 1));
    if on_boundary {
        log::warn!("{OP}: optimum lies on the grid boundary, widen the scan range");
    }
    Ok(CancellationResult {
        best_amp: amps[ia],
        best_phase: phases[ip],
        amps: amps.to_vec(),
        phases: phases.to_vec(),
        residual,
        on_boundary,
    })
}
