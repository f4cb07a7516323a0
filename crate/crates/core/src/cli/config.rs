//! JSON experiment configuration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::driveframe::{Segment, SegmentKind};
use crate::sysmodel::{hz_to_rad, SystemConfig};
use crate::table::Format;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out_dir(), format: Format::Csv }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    SnrSweep(SnrSweep),
    Histogram(Histogram),
    QndChain(QndChain),
    SpectatorEcho(SpectatorEcho),
    EfficiencyCalib(EfficiencyCalib),
    CancellationTune(CancellationTune),
    DepletionDesign(DepletionDesign),
    FrameCheck(FrameCheck),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SnrSweep(_) => "snr-sweep",
            Experiment::Histogram(_) => "histogram",
            Experiment::QndChain(_) => "qnd-chain",
            Experiment::SpectatorEcho(_) => "spectator-echo",
            Experiment::EfficiencyCalib(_) => "efficiency-calib",
            Experiment::CancellationTune(_) => "cancellation-tune",
            Experiment::DepletionDesign(_) => "depletion-design",
            Experiment::FrameCheck(_) => "frame-check",
        }
    }
}

/// One piece of the longitudinal coupling profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub kind: SegmentKind,
    /// `ζ/2π` in Hz, or the multiplier of the previous level for `reversal`.
    pub amplitude: f64,
    pub duration_s: f64,
}

impl SegmentConfig {
    pub fn to_segment(self) -> Segment {
        let amplitude = match self.kind {
            SegmentKind::Reversal => Complex64::new(self.amplitude, 0.0),
            _ => Complex64::new(hz_to_rad(self.amplitude), 0.0),
        };
        Segment { kind: self.kind, amplitude, duration: self.duration_s }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeChoice {
    #[default]
    Optimal,
    Boxcar,
}

/// Readout pulse shared by the shot-based experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub dt_s: f64,
    pub segments: Vec<SegmentConfig>,
    /// Residual dispersive shift `χ/2π` present during the readout.
    #[serde(default)]
    pub chi_hz: f64,
    #[serde(default)]
    pub envelope: EnvelopeChoice,
    /// Rescale the coupling so the state means sit this many σ apart.
    #[serde(default)]
    pub target_separation: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl Range {
    pub fn values(&self, field: &'static str) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.max >= self.min) {
            return Err(Error::validation(field, "range needs points ≥ 1 and max ≥ min"));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        if self.log {
            if !(self.min > 0.0) {
                return Err(Error::validation(field, "log range needs min > 0"));
            }
            return Ok(crate::demod::log_grid(self.min, self.max, self.points));
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        Ok((0..self.points).map(|k| self.min + step * k as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSweep {
    /// `dispersive-boxcar`, `dispersive-optimal`, `longitudinal-boxcar` or
    /// `longitudinal-optimal`.
    pub formula: String,
    /// `ζ/2π` or `ε/2π` in Hz.
    pub coupling_hz: f64,
    /// Dispersive shift `χ/2π`; defaults to `κ/2π`.
    #[serde(default)]
    pub chi_hz: Option<f64>,
    pub kappa_tau: Range,
    /// Defaults to the system efficiency.
    #[serde(default)]
    pub eta: Option<f64>,
}

fn default_bins() -> usize {
    60
}

fn default_q_ratio() -> f64 {
    0.5
}

fn default_latch_k() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Histogram {
    pub readout: ReadoutConfig,
    pub n_shots: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_q_ratio")]
    pub q_variance_ratio: f64,
    /// Include T₁ decay during the window.
    #[serde(default)]
    pub relaxation: bool,
    #[serde(default)]
    pub write_shots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QndChain {
    pub readout: ReadoutConfig,
    pub n_chains: usize,
    pub n_repeats: usize,
    #[serde(default = "default_latch_k")]
    pub latch_k: f64,
    #[serde(default)]
    pub excitation_rate_hz: f64,
    #[serde(default = "default_q_ratio")]
    pub q_variance_ratio: f64,
    #[serde(default)]
    pub write_shots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectatorEcho {
    pub readout: ReadoutConfig,
    /// Defaults to the measured qubit's `χ_qc/2π`.
    #[serde(default)]
    pub chi_spectator_hz: Option<f64>,
    pub n_echo: Vec<usize>,
    pub sequence_length_s: f64,
    #[serde(default)]
    pub measurement_start_s: Option<f64>,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyCalib {
    pub readout: ReadoutConfig,
    /// Drive amplitudes relative to the readout pulse.
    pub amps: Range,
    /// Efficiency of the synthetic data; defaults to the system efficiency.
    #[serde(default)]
    pub eta_true: Option<f64>,
    #[serde(default = "default_baseline")]
    pub baseline_contrast: f64,
    #[serde(default = "default_noise")]
    pub rel_noise: f64,
}

fn default_baseline() -> f64 {
    0.95
}

fn default_noise() -> f64 {
    0.005
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancellationTune {
    pub readout: ReadoutConfig,
    pub leakage_re: f64,
    pub leakage_im: f64,
    /// Cavity drive `ε/2π` produced by unit leakage.
    pub leak_drive_hz: f64,
    pub amps: Range,
    pub phases: Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepletionDesign {
    pub zeta_hz: f64,
    pub ring_time_s: f64,
    pub multiplier: f64,
    pub dt_s: f64,
    /// Depletion length to compare against; the ideal one is always computed.
    #[serde(default)]
    pub applied_duration_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameCheck {
    /// Drive strength as `|ε̄/Δ|`.
    pub xi: f64,
    /// Ramp durations to compare; 0 means an instantaneous turn-on.
    pub ramp_s: Vec<f64>,
    pub hold_s: f64,
    #[serde(default)]
    pub use_filter: bool,
    /// Defaults to `0.05/|Δ|`.
    #[serde(default)]
    pub dt_s: Option<f64>,
}
