//! Drive envelopes and the displaced frame of the driven mode.
//!
//! The drive `ε(t) = ε̄(t) e^{−iω_c t}` on the qubit (or filter) is absorbed
//! into a classical displacement `ξ(t)` solving
//! `ξ̇ = −(Γ/2 + iω_m) ξ + i ε(t)`. In the frame rotating at `ω_c` the slow
//! amplitude `x(t) = ξ(t) e^{iω_c t}` obeys
//!
//! ```text
//! ẋ = −(Γ/2 − iΔ) x + i ε̄(t),      Δ = ω_c − ω_m
//! ```
//!
//! whose adiabatic branch is `x̄ = i ε̄/(Γ/2 − iΔ) ≈ −ε̄/Δ`. Anything else in the
//! solution is the homogeneous term `A e^{−(Γ/2 − iΔ)t}`, resonant with the
//! mode in the lab frame, excited by ramping the envelope too quickly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::rk4;
use crate::sysmodel::{derive_couplings, DerivedCouplings, SystemParams, TWO_PI};
use crate::{Error, Result};

/// Steepness of the tanh ramp profile; edges have slope `≈ 5e-3` of the peak.
const RAMP_STEEPNESS: f64 = 4.0;

/// Largest allowed `dt·|Δ|` when integrating the frame equation.
pub const MAX_DT_DETUNING: f64 = 0.1;

/// A uniformly sampled complex slow envelope `ε̄(t_n)`, `t_n = n·dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveEnvelope {
    pub dt: f64,
    pub samples: Vec<Complex64>,
    /// Duration of the leading ramp (0 for an instantaneous turn-on).
    pub ring_time: f64,
}

impl DriveEnvelope {
    pub fn new(dt: f64, samples: Vec<Complex64>) -> Result<Self> {
        Self::with_ring_time(dt, samples, 0.0)
    }

    pub fn with_ring_time(dt: f64, samples: Vec<Complex64>, ring_time: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation("dt", format!("must be > 0, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::validation("samples", "envelope has no samples"));
        }
        Ok(DriveEnvelope { dt, samples, ring_time: ring_time.max(0.0) })
    }

    pub fn constant(amplitude: Complex64, n: usize, dt: f64) -> Result<Self> {
        Self::new(dt, vec![amplitude; n])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |n| n as f64 * self.dt)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        DriveEnvelope { samples: self.samples.iter().map(|s| s * factor).collect(), ..self.clone() }
    }

    /// Linear interpolation between samples, held constant past the last one.
    fn at(&self, t: f64) -> Complex64 {
        let x = (t / self.dt).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= self.samples.len() {
            return *self.samples.last().expect("non-empty");
        }
        let f = x - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }

    /// Writes `t_s, re_eps_hz, im_eps_hz` (envelope divided by 2π).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_s", "re_eps_hz", "im_eps_hz"])?;
        for (t, s) in self.times().zip(&self.samples) {
            w.write_record([t.to_string(), (s.re / TWO_PI).to_string(), (s.im / TWO_PI).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`DriveEnvelope::write_csv`]; `dt` is taken
    /// from the first two time stamps and must be uniform.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut t = Vec::new();
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("envelope csv: bad value in column {i}")))
            };
            t.push(field(0)?);
            samples.push(Complex64::new(field(1)?, field(2)?) * TWO_PI);
        }
        if t.len() < 2 {
            return Err(Error::Config("envelope csv needs at least two rows".into()));
        }
        let dt = t[1] - t[0];
        if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
            return Err(Error::Config("envelope csv: time column is not uniform".into()));
        }
        Self::new(dt, samples)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// Hold `amplitude` for the whole segment (a step if the level changes).
    Constant,
    /// Smoothly move from the previous level to `amplitude`.
    TanhRamp,
    /// Hold `amplitude × previous level`; e.g. `-2` for a depletion segment.
    Reversal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub amplitude: Complex64,
    pub duration: f64,
}

impl Segment {
    pub fn constant(amplitude: impl Into<Complex64>, duration: f64) -> Self {
        Segment { kind: SegmentKind::Constant, amplitude: amplitude.into(), duration }
    }

    pub fn ramp(amplitude: impl Into<Complex64>, duration: f64) -> Self {
        Segment { kind: SegmentKind::TanhRamp, amplitude: amplitude.into(), duration }
    }

    pub fn reversal(multiplier: impl Into<Complex64>, duration: f64) -> Self {
        Segment { kind: SegmentKind::Reversal, amplitude: multiplier.into(), duration }
    }
}

/// Ramp profile on `u ∈ [0, 1]`, exactly 0 at `u = 0` and 1 at `u = 1`.
fn ramp_profile(u: f64) -> f64 {
    let k = RAMP_STEEPNESS;
    ((k * (2.0 * u - 1.0)).tanh() + k.tanh()) / (2.0 * k.tanh())
}

/// Concatenates segments into one sampled envelope.
pub fn make_envelope(segments: &[Segment], dt: f64) -> Result<DriveEnvelope> {
    if segments.is_empty() {
        return Err(Error::validation("segments", "segment list is empty"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be > 0, got {dt}")));
    }
    let mut samples = Vec::new();
    let mut level = Complex64::new(0.0, 0.0);
    let mut ring_time = 0.0;
    let mut leading_ramps = true;
    for seg in segments {
        if !(seg.duration.is_finite() && seg.duration > 0.0) {
            return Err(Error::validation("duration", format!("must be > 0, got {}", seg.duration)));
        }
        let n = (seg.duration / dt).round() as usize;
        if n == 0 || (n as f64 * dt - seg.duration).abs() > dt {
            return Err(Error::validation(
                "duration",
                format!("{} s is not resolvable with dt = {dt} s", seg.duration),
            ));
        }
        match seg.kind {
            SegmentKind::Constant => {
                level = seg.amplitude;
                samples.extend(std::iter::repeat_n(level, n));
            }
            SegmentKind::TanhRamp => {
                let start = level;
                samples.extend((0..n).map(|j| start + (seg.amplitude - start) * ramp_profile(j as f64 / n as f64)));
                level = seg.amplitude;
            }
            SegmentKind::Reversal => {
                if samples.is_empty() {
                    return Err(Error::validation("segments", "reversal needs a preceding segment"));
                }
                level *= seg.amplitude;
                samples.extend(std::iter::repeat_n(level, n));
            }
        }
        if leading_ramps && seg.kind == SegmentKind::TanhRamp {
            ring_time += n as f64 * dt;
        } else {
            leading_ramps = false;
        }
    }
    DriveEnvelope::with_ring_time(dt, samples, ring_time)
}

/// Displaced-frame trajectory and the coupling it generates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSolution {
    /// Slow displacement `ξ(t_n) e^{iω_c t_n}`, dimensionless.
    pub xi: Vec<Complex64>,
    /// Longitudinal coupling `ζ(t_n)` in rad/s.
    pub zeta: Vec<Complex64>,
    /// `|ξ − ξ_adiabatic|` at the end of the ring-up.
    pub resonant_residual: f64,
}

struct DrivenMode {
    damping: f64,
    detuning: f64,
}

fn driven_mode(params: &SystemParams, use_filter: bool, op: &'static str) -> Result<DrivenMode> {
    let (damping, detuning) = if use_filter {
        (params.kappa_filter_decay, params.filter_detuning())
    } else {
        (params.gamma1, params.detuning())
    };
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::domain(op, "drive detuning is zero"));
    }
    Ok(DrivenMode { damping, detuning })
}

/// Integrates the slow frame equation with RK4 at the envelope's own `dt`.
pub fn solve_frame(env: &DriveEnvelope, params: &SystemParams, use_filter: bool) -> Result<FrameSolution> {
    const OP: &str = "solve_frame";
    let mode = driven_mode(params, use_filter, OP)?;
    if env.dt * mode.detuning.abs() > MAX_DT_DETUNING {
        return Err(Error::resolution(OP, format!("dt·|Δ| = {:.3} > {MAX_DT_DETUNING}", env.dt * mode.detuning.abs())));
    }
    let lambda = Complex64::new(0.5 * mode.damping, -mode.detuning);
    let i = Complex64::i();
    let mut x = [Complex64::new(0.0, 0.0)];
    let mut xi = Vec::with_capacity(env.len());
    xi.push(x[0]);
    for n in 1..env.len() {
        let t = (n - 1) as f64 * env.dt;
        x = rk4::step(t, x, env.dt, |t, y| [-lambda * y[0] + i * env.at(t)]);
        xi.push(x[0]);
    }
    let adiabatic = |eps: Complex64| i * eps / lambda;
    let k = ((env.ring_time / env.dt).round() as usize).min(env.len() - 1);
    let resonant_residual = (xi[k] - adiabatic(env.samples[k])).norm();

    let zeta = zeta_of_envelope(env, &derive_couplings(params)?, params, use_filter)?;
    Ok(FrameSolution { xi, zeta, resonant_residual })
}

/// `ζ(t) = √(2αχ_qc) ε̄(t)/Δ`, or `√(χ_qf χ_qc) ε̄(t)/|Δ_f|` through the filter.
pub fn zeta_of_envelope(
    env: &DriveEnvelope,
    couplings: &DerivedCouplings,
    params: &SystemParams,
    use_filter: bool,
) -> Result<Vec<Complex64>> {
    let mode = driven_mode(params, use_filter, "zeta_of_envelope")?;
    let gain = if use_filter {
        couplings.zeta_per_xi_filter() / mode.detuning.abs()
    } else {
        couplings.zeta_per_xi() / mode.detuning
    };
    Ok(env.samples.iter().map(|e| e * gain).collect())
}

/// Envelope amplitude that yields a longitudinal coupling of magnitude `zeta`.
pub fn envelope_for_zeta(
    zeta: f64,
    couplings: &DerivedCouplings,
    params: &SystemParams,
    use_filter: bool,
) -> Result<f64> {
    let mode = driven_mode(params, use_filter, "envelope_for_zeta")?;
    let per_xi = if use_filter { couplings.zeta_per_xi_filter() } else { couplings.zeta_per_xi() };
    Ok(zeta / per_xi * mode.detuning.abs())
}
