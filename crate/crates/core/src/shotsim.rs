//! Monte Carlo single-shot records, assignment and readout metrics.
//!
//! A shot integrates the noiseless output of the prepared branch against the
//! envelope `K`, switching to the other branch at a quantum jump, and adds
//! unit-variance Gaussian noise. In these units the means of the two states
//! are `√2·SNR` apart along `I`.
//!
//! Each shot (or chain of back-to-back windows) draws from its own
//! ChaCha8 stream selected by its index, so batches are bit-identical for any
//! thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::path::Path;

use crate::cavitydyn::{ConditionalTrajectory, QubitState};
use crate::demod::{best_phase, DemodEnvelope};
use crate::quadrature;
use crate::{Error, Result};

/// Scale from the median absolute deviation to a Gaussian σ.
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitState {
    G,
    E,
    /// Excited with probability `p_e`, independently per shot.
    Thermal(f64),
}

#[derive(Clone, Debug)]
pub struct ReadoutSpec {
    pub traj: ConditionalTrajectory,
    pub env: DemodEnvelope,
    pub eta: f64,
    /// Demodulation phase; `None` aligns the state difference with `I`.
    pub phase: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ShotConfig {
    pub n_shots: usize,
    pub seed: u64,
    pub init_state: InitState,
    /// Relaxation time; `f64::INFINITY` disables decay.
    pub t1: f64,
    /// Optional g→e rate during readout (1/s).
    pub excitation_rate: f64,
    pub readout: ReadoutSpec,
    /// Windows per chain; 1 for independent shots.
    pub n_repeats: usize,
    /// Variance of the `Q` noise relative to `I`; display only.
    pub q_variance_ratio: f64,
}

impl ShotConfig {
    pub fn new(readout: ReadoutSpec, n_shots: usize, seed: u64) -> Self {
        ShotConfig {
            n_shots,
            seed,
            init_state: InitState::Thermal(0.5),
            t1: f64::INFINITY,
            excitation_rate: 0.0,
            readout,
            n_repeats: 1,
            q_variance_ratio: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_shots == 0 {
            return Err(Error::validation("n_shots", "must be ≥ 1"));
        }
        if self.n_repeats == 0 {
            return Err(Error::validation("n_repeats", "must be ≥ 1"));
        }
        if !(self.t1 > 0.0) {
            return Err(Error::validation("t1", format!("must be > 0, got {}", self.t1)));
        }
        if !(self.excitation_rate >= 0.0 && self.excitation_rate.is_finite()) {
            return Err(Error::validation("excitation_rate", "must be finite and ≥ 0"));
        }
        if let InitState::Thermal(p) = self.init_state {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation("p_e", format!("must lie in [0, 1], got {p}")));
            }
        }
        if !(self.q_variance_ratio >= 0.0) {
            return Err(Error::validation("q_variance_ratio", "must be ≥ 0"));
        }
        let r = &self.readout;
        if !(r.eta > 0.0 && r.eta <= 1.0) {
            return Err(Error::validation("eta", format!("must lie in (0, 1], got {}", r.eta)));
        }
        r.env.check_grid(&r.traj, "simulate_shots")
    }
}

/// Shots stored chain-major: entry `s·n_repeats + r` is window `r` of chain `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotBatch {
    pub n_shots: usize,
    pub n_repeats: usize,
    pub i_vals: Vec<f64>,
    pub q_vals: Vec<f64>,
    /// Qubit state at the start of each window.
    pub labels: Vec<QubitState>,
    /// Time of the jump inside each window, if one occurred.
    pub jump_times: Vec<Option<f64>>,
}

impl ShotBatch {
    pub fn len(&self) -> usize {
        self.i_vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_vals.is_empty()
    }

    /// Writes `shot_idx, repeat_idx, init_label, i_val, q_val, jump_time_s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["shot_idx", "repeat_idx", "init_label", "i_val", "q_val", "jump_time_s"])?;
        for k in 0..self.len() {
            w.write_record([
                (k / self.n_repeats).to_string(),
                (k % self.n_repeats).to_string(),
                self.labels[k].label().to_string(),
                self.i_vals[k].to_string(),
                self.q_vals[k].to_string(),
                self.jump_times[k].map_or_else(String::new, |t| t.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// I values of windows whose starting state is `state`.
    pub fn i_of(&self, state: QubitState) -> Vec<f64> {
        self.i_vals.iter().zip(&self.labels).filter(|(_, l)| **l == state).map(|(i, _)| *i).collect()
    }
}

/// Noiseless integrated signals, with prefix sums for splicing at a jump.
struct Kernel {
    dt: f64,
    n: usize,
    prefix_g: Vec<Complex64>,
    prefix_e: Vec<Complex64>,
    scale: Complex64,
}

impl Kernel {
    fn new(r: &ReadoutSpec) -> Result<Self> {
        let w = quadrature::node_weights(r.traj.len(), r.traj.dt);
        let prefix = |out: &[Complex64]| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut p = Vec::with_capacity(out.len() + 1);
            p.push(acc);
            for ((w, k), o) in w.iter().zip(&r.env.weights).zip(out) {
                acc += k * o * *w;
                p.push(acc);
            }
            p
        };
        let norm: f64 = w.iter().zip(&r.env.weights).map(|(w, k)| w * k.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::domain("simulate_shots", "demodulation envelope is zero"));
        }
        let phase = match r.phase {
            Some(p) => p,
            None => best_phase(&r.traj, &r.env)?,
        };
        let scale = Complex64::from_polar(2.0 * r.eta.sqrt() / norm.sqrt(), -phase);
        Ok(Kernel {
            dt: r.traj.dt,
            n: r.traj.len(),
            prefix_g: prefix(&r.traj.out_g),
            prefix_e: prefix(&r.traj.out_e),
            scale,
        })
    }

    /// Integration span, `(N − 1)·dt`.
    fn window(&self) -> f64 {
        (self.n - 1) as f64 * self.dt
    }

    fn prefix(&self, s: QubitState) -> &[Complex64] {
        match s {
            QubitState::G => &self.prefix_g,
            QubitState::E => &self.prefix_e,
        }
    }

    /// Scaled mean signal for a window starting in `from`, switching to `to`
    /// at `jump` (samples at `t ≥ jump` follow `to`).
    fn signal(&self, from: QubitState, jump: Option<(f64, QubitState)>) -> Complex64 {
        let z = match jump {
            None => self.prefix(from)[self.n],
            Some((t, to)) => {
                let j = ((t / self.dt).ceil() as usize).min(self.n - 1);
                self.prefix(from)[j] + self.prefix(to)[self.n] - self.prefix(to)[j]
            }
        };
        z * self.scale
    }
}

struct Window {
    i: f64,
    q: f64,
    start: QubitState,
    jump: Option<f64>,
}

fn simulate_chain(cfg: &ShotConfig, kernel: &Kernel, chain: usize) -> Vec<Window> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let mut state = match cfg.init_state {
        InitState::G => QubitState::G,
        InitState::E => QubitState::E,
        InitState::Thermal(p) => {
            if rng.random::<f64>() < p {
                QubitState::E
            } else {
                QubitState::G
            }
        }
    };
    let q_std = cfg.q_variance_ratio.sqrt();
    let mut windows = Vec::with_capacity(cfg.n_repeats);
    for _ in 0..cfg.n_repeats {
        let (rate, other) = match state {
            QubitState::E => (1.0 / cfg.t1, QubitState::G),
            QubitState::G => (cfg.excitation_rate, QubitState::E),
        };
        let wait: f64 = rng.sample(Exp1);
        let jump = (rate > 0.0 && wait / rate < kernel.window()).then(|| wait / rate);
        let z = kernel.signal(state, jump.map(|t| (t, other)));
        let ni: f64 = rng.sample(StandardNormal);
        let nq: f64 = rng.sample(StandardNormal);
        windows.push(Window { i: z.re + ni, q: z.im + q_std * nq, start: state, jump });
        if jump.is_some() {
            state = other;
        }
    }
    windows
}

pub fn simulate_shots(cfg: &ShotConfig) -> Result<ShotBatch> {
    cfg.validate()?;
    let kernel = Kernel::new(&cfg.readout)?;
    let chains: Vec<Vec<Window>> = (0..cfg.n_shots).into_par_iter().map(|s| simulate_chain(cfg, &kernel, s)).collect();
    let total = cfg.n_shots * cfg.n_repeats;
    let mut batch = ShotBatch {
        n_shots: cfg.n_shots,
        n_repeats: cfg.n_repeats,
        i_vals: Vec::with_capacity(total),
        q_vals: Vec::with_capacity(total),
        labels: Vec::with_capacity(total),
        jump_times: Vec::with_capacity(total),
    };
    for w in chains.into_iter().flatten() {
        batch.i_vals.push(w.i);
        batch.q_vals.push(w.q);
        batch.labels.push(w.start);
        batch.jump_times.push(w.jump);
    }
    Ok(batch)
}

/// Location and width of one Gaussian peak.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median and scaled MAD; insensitive to the small tail produced by jumps.
pub fn fit_gaussian(values: &[f64]) -> Result<GaussianFit> {
    if values.len() < 2 {
        return Err(Error::domain("fit_gaussian", "need at least two values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = median_sorted(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Ok(GaussianFit { mean, sigma: MAD_TO_SIGMA * median_sorted(&dev) })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var)
}

/// Fraction of `sorted` strictly above `t`.
fn frac_above(sorted: &[f64], t: f64) -> f64 {
    let k = sorted.partition_point(|&x| x <= t);
    (sorted.len() - k) as f64 / sorted.len() as f64
}

/// Fraction of `sorted` at or below `t`.
fn frac_below(sorted: &[f64], t: f64) -> f64 {
    1.0 - frac_above(sorted, t)
}

/// Golden-section search for the threshold minimising `p(e|g) + p(g|e)`.
fn optimise_threshold(g_sorted: &[f64], e_sorted: &[f64], lo: f64, hi: f64) -> f64 {
    let err = |t: f64| frac_above(g_sorted, t) + frac_below(e_sorted, t);
    if !(hi > lo) {
        return 0.5 * (lo + hi);
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (err(c), err(d));
    for _ in 0..200 {
        if b - a < 1e-9 * (hi - lo) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = err(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = err(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutMetrics {
    /// `(mean_e − mean_g)/√(var_g + var_e)` from sample moments.
    pub snr_measured: f64,
    /// Pooled fitted noise width.
    pub sigma_i: f64,
    pub mu_g: f64,
    pub mu_e: f64,
    pub separation_sigmas: f64,
    /// `1 − p(e|g) − p(g|e)` of the fitted Gaussians at the threshold.
    pub discrimination_power: f64,
    /// `1 − p(e|g)`.
    pub f_g: f64,
    /// `1 − p(g|e)`.
    pub f_e: f64,
    pub f_total: f64,
    /// `(p_ee + p_gg)/2` over consecutive windows; `None` for single shots.
    pub qndness: Option<f64>,
    pub threshold: f64,
    /// Fraction of windows dropped by post-selection (chains only).
    pub discarded_fraction: Option<f64>,
}

impl ReadoutMetrics {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

struct Fits {
    g: GaussianFit,
    e: GaussianFit,
    sigma: f64,
}

fn fit_states(g: &[f64], e: &[f64]) -> Result<Fits> {
    const OP: &str = "assign_and_score";
    if g.len() < 2 || e.len() < 2 {
        return Err(Error::domain(OP, "both states need at least two shots"));
    }
    if g.len() + e.len() < 100 {
        log::warn!("{OP}: only {} shots, Gaussian fit is unreliable", g.len() + e.len());
    }
    let (fg, fe) = (fit_gaussian(g)?, fit_gaussian(e)?);
    let sigma = (0.5 * (fg.sigma.powi(2) + fe.sigma.powi(2))).sqrt();
    Ok(Fits { g: fg, e: fe, sigma })
}

/// Fitted-Gaussian error rates at threshold `t`.
fn gaussian_errors(f: &Fits, t: f64) -> (f64, f64) {
    let tail = |z: f64| Normal::standard().cdf(z);
    let p_e_given_g = if f.g.sigma > 0.0 { tail((f.g.mean - t) / f.g.sigma) } else { f64::from(t < f.g.mean) };
    let p_g_given_e = if f.e.sigma > 0.0 { tail((t - f.e.mean) / f.e.sigma) } else { f64::from(t >= f.e.mean) };
    (p_e_given_g, p_g_given_e)
}

fn overlap_warning(f: &Fits) {
    let (a, b) = gaussian_errors(f, 0.5 * (f.g.mean + f.e.mean));
    if 0.5 * (a + b) > 0.4 {
        log::warn!("assign_and_score: distributions overlap by more than 40%, metrics are degenerate");
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Scores labelled shots: the prepared state of the first window is the
/// truth. Chains are scored through post-selection on the previous window.
pub fn assign_and_score(batch: &ShotBatch, threshold: Option<f64>) -> Result<ReadoutMetrics> {
    if batch.is_empty() {
        return Err(Error::domain("assign_and_score", "batch is empty"));
    }
    let (g_all, e_all) = (batch.i_of(QubitState::G), batch.i_of(QubitState::E));
    let fits = fit_states(&g_all, &e_all)?;
    overlap_warning(&fits);
    let ((mg, vg), (me, ve)) = (mean_var(&g_all), mean_var(&e_all));
    let snr_measured = (me - mg) / (vg + ve).sqrt();
    let separation_sigmas = (fits.e.mean - fits.g.mean) / fits.sigma;

    // Truth per scored window, and the I value being scored.
    let (g_scored, e_scored, discarded) = if batch.n_repeats == 1 {
        (g_all.clone(), e_all.clone(), None)
    } else {
        let (mut g, mut e) = (Vec::new(), Vec::new());
        let mut pairs = 0usize;
        for s in 0..batch.n_shots {
            for r in 1..batch.n_repeats {
                let (prev, cur) = (s * batch.n_repeats + r - 1, s * batch.n_repeats + r);
                pairs += 1;
                if batch.i_vals[prev] < fits.g.mean {
                    g.push(batch.i_vals[cur]);
                } else if batch.i_vals[prev] > fits.e.mean {
                    e.push(batch.i_vals[cur]);
                }
            }
        }
        if g.is_empty() || e.is_empty() {
            return Err(Error::domain("assign_and_score", "post-selection left no shots for one state"));
        }
        let kept = g.len() + e.len();
        (g, e, Some(1.0 - kept as f64 / pairs as f64))
    };
    let (g_sorted, e_sorted) = (sorted(g_scored), sorted(e_scored));
    let threshold = match threshold {
        Some(t) => t,
        None => optimise_threshold(&g_sorted, &e_sorted, fits.g.mean, fits.e.mean),
    };
    let (pg, pe) = gaussian_errors(&fits, threshold);
    let discrimination_power = 1.0 - pg - pe;
    let f_g = 1.0 - frac_above(&g_sorted, threshold);
    let f_e = 1.0 - frac_below(&e_sorted, threshold);

    let qndness = (batch.n_repeats > 1).then(|| {
        let (mut same, mut total) = ([0usize; 2], [0usize; 2]);
        for s in 0..batch.n_shots {
            for r in 1..batch.n_repeats {
                let prev = batch.i_vals[s * batch.n_repeats + r - 1] > threshold;
                let cur = batch.i_vals[s * batch.n_repeats + r] > threshold;
                total[prev as usize] += 1;
                same[prev as usize] += usize::from(prev == cur);
            }
        }
        let p = |k: usize| if total[k] > 0 { same[k] as f64 / total[k] as f64 } else { 1.0 };
        0.5 * (p(0) + p(1))
    });

    Ok(ReadoutMetrics {
        snr_measured,
        sigma_i: fits.sigma,
        mu_g: fits.g.mean,
        mu_e: fits.e.mean,
        separation_sigmas,
        discrimination_power,
        f_g,
        f_e,
        f_total: f_g + f_e - 1.0,
        qndness,
        threshold,
        discarded_fraction: discarded,
    })
}

/// Hysteresis filter: switch to e above `μ_e − kσ`, back to g below `μ_g + kσ`.
pub fn latch(i_vals: &[f64], m: &ReadoutMetrics, k: f64) -> Vec<QubitState> {
    let enter_e = m.mu_e - k * m.sigma_i;
    let enter_g = m.mu_g + k * m.sigma_i;
    let mut state = None;
    i_vals
        .iter()
        .map(|&i| {
            let next = match state {
                None if i > 0.5 * (m.mu_g + m.mu_e) => QubitState::E,
                None => QubitState::G,
                Some(QubitState::G) if i > enter_e => QubitState::E,
                Some(QubitState::E) if i < enter_g => QubitState::G,
                Some(s) => s,
            };
            state = Some(next);
            next
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub batch: ShotBatch,
    pub metrics: ReadoutMetrics,
    /// Latched state per window, chain-major like the batch.
    pub latched: Vec<QubitState>,
}

/// Back-to-back windows with the qubit state carried across them.
pub fn chain_measure(cfg: &ShotConfig, latch_k: f64) -> Result<ChainResult> {
    if cfg.n_repeats < 2 {
        return Err(Error::validation("n_repeats", "chains need at least 2 windows"));
    }
    let batch = simulate_shots(cfg)?;
    let metrics = assign_and_score(&batch, None)?;
    let latched = batch.i_vals.chunks(batch.n_repeats).flat_map(|c| latch(c, &metrics, latch_k)).collect();
    Ok(ChainResult { batch, metrics, latched })
}

/// Two-dimensional histogram of a batch in units of the fitted `I` width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub sigma: f64,
    /// Bin edges along `I/σ`.
    pub i_edges: Vec<f64>,
    /// The same edges divided by `√η`, i.e. referred to a lossless chain.
    pub i_edges_lossless: Vec<f64>,
    pub q_edges: Vec<f64>,
    /// Row-major counts `[i_bin][q_bin]` for windows starting in g and e.
    pub counts_g: Vec<Vec<u64>>,
    pub counts_e: Vec<Vec<u64>>,
    pub fit_reliable: bool,
}

impl Histogram {
    /// Marginal counts along `I`.
    pub fn marginal_i(&self, state: QubitState) -> Vec<u64> {
        let c = if state == QubitState::G { &self.counts_g } else { &self.counts_e };
        c.iter().map(|row| row.iter().sum()).collect()
    }

    /// Writes `i_lo, i_hi, i_lo_lossless, q_lo, q_hi, count_g, count_e`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["i_lo", "i_hi", "i_lo_lossless", "q_lo", "q_hi", "count_g", "count_e"])?;
        for a in 0..self.i_edges.len() - 1 {
            for b in 0..self.q_edges.len() - 1 {
                w.write_record([
                    self.i_edges[a].to_string(),
                    self.i_edges[a + 1].to_string(),
                    self.i_edges_lossless[a].to_string(),
                    self.q_edges[b].to_string(),
                    self.q_edges[b + 1].to_string(),
                    self.counts_g[a][b].to_string(),
                    self.counts_e[a][b].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn histogram(batch: &ShotBatch, bins: usize, eta: f64) -> Result<Histogram> {
    if batch.is_empty() {
        return Err(Error::domain("histogram", "batch is empty"));
    }
    if bins == 0 {
        return Err(Error::validation("bins", "must be ≥ 1"));
    }
    let fit_reliable = batch.len() >= 100;
    if !fit_reliable {
        log::warn!("histogram: only {} shots, Gaussian fit is unreliable", batch.len());
    }
    let (g, e) = (batch.i_of(QubitState::G), batch.i_of(QubitState::E));
    let sigma = match (g.len() >= 2, e.len() >= 2) {
        (true, true) => fit_states(&g, &e)?.sigma,
        (true, false) => fit_gaussian(&g)?.sigma,
        (false, true) => fit_gaussian(&e)?.sigma,
        (false, false) => fit_gaussian(&batch.i_vals)?.sigma,
    };
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let edges = |vals: &[f64]| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min) / sigma;
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) / sigma;
        let hi = if hi > lo { hi } else { lo + 1.0 };
        (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect::<Vec<_>>()
    };
    let i_edges = edges(&batch.i_vals);
    let q_edges = edges(&batch.q_vals);
    let locate = |edges: &[f64], x: f64| {
        let (lo, hi) = (edges[0], edges[bins]);
        (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
    };
    let mut counts_g = vec![vec![0u64; bins]; bins];
    let mut counts_e = vec![vec![0u64; bins]; bins];
    for k in 0..batch.len() {
        let (a, b) = (locate(&i_edges, batch.i_vals[k] / sigma), locate(&q_edges, batch.q_vals[k] / sigma));
        match batch.labels[k] {
            QubitState::G => counts_g[a][b] += 1,
            QubitState::E => counts_e[a][b] += 1,
        }
    }
    Ok(Histogram {
        sigma,
        i_edges_lossless: i_edges.iter().map(|x| x / eta.sqrt()).collect(),
        i_edges,
        q_edges,
        counts_g,
        counts_e,
        fit_reliable,
    })
}

/// `1 − 2Φ(−d/2)`: ideal discrimination of two unit Gaussians `d` apart.
pub fn ideal_discrimination(d: f64) -> f64 {
    1.0 - 2.0 * Normal::standard().cdf(-0.5 * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavitydyn::evolve_longitudinal;
    use crate::demod::{optimal_envelope, snr_numeric};
    use approx::assert_relative_eq;

    const KAPPA: f64 = 1e7;

    fn readout(zeta: f64, n: usize, eta: f64) -> ReadoutSpec {
        let traj = evolve_longitudinal(&vec![Complex64::new(zeta, 0.0); n], KAPPA, 1e-9).unwrap();
        let env = optimal_envelope(&traj).unwrap_or_else(|_| DemodEnvelope::boxcar_for(&traj));
        ReadoutSpec { traj, env, eta, phase: None }
    }

    fn analytic_separation(r: &ReadoutSpec) -> f64 {
        2f64.sqrt() * *snr_numeric(&r.traj, &r.env, None, r.eta).unwrap().snr.last().unwrap()
    }

    #[test]
    fn gaussian_error_oracle() {
        assert_relative_eq!(Normal::standard().cdf(-2.9), 1.86581e-3, max_relative = 1e-5);
        assert_relative_eq!(ideal_discrimination(5.8), 1.0 - 2.0 * 1.86581e-3, max_relative = 1e-8);
    }

    #[test]
    fn separation_matches_analytic_without_jumps() {
        let r = readout(0.3 * KAPPA, 400, 1.0);
        let d = analytic_separation(&r);
        let mut cfg = ShotConfig::new(r, 20_000, 3);
        cfg.init_state = InitState::Thermal(0.5);
        let batch = simulate_shots(&cfg).unwrap();
        let m = assign_and_score(&batch, None).unwrap();
        assert!((m.separation_sigmas - d).abs() < 0.03 * d, "{} vs {d}", m.separation_sigmas);
        assert!((m.snr_measured * 2f64.sqrt() - d).abs() < 0.03 * d);
        assert!(m.qndness.is_none());
    }

    #[test]
    fn zero_drive_is_indistinguishable() {
        let r = readout(0.0, 100, 1.0);
        let batch = simulate_shots(&ShotConfig::new(r, 20_000, 1)).unwrap();
        let m = assign_and_score(&batch, Some(0.0)).unwrap();
        assert!(m.mu_g.abs() < 0.05 && m.mu_e.abs() < 0.05);
        assert!(m.discrimination_power.abs() < 0.05);
        assert!(m.f_total.abs() < 0.05);
    }

    #[test]
    fn deterministic_for_any_thread_count() {
        let r = readout(0.2 * KAPPA, 200, 0.6);
        let mut cfg = ShotConfig::new(r, 3000, 42);
        cfg.t1 = 2e-6;
        cfg.n_repeats = 3;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_shots(&cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(simulate_shots(&other).unwrap().i_vals, run(2).i_vals);
    }

    #[test]
    fn jumps_only_come_from_excited_state() {
        let r = readout(0.2 * KAPPA, 200, 1.0);
        let mut cfg = ShotConfig::new(r, 5000, 7);
        cfg.t1 = 1e-6;
        let batch = simulate_shots(&cfg).unwrap();
        for (l, j) in batch.labels.iter().zip(&batch.jump_times) {
            if *l == QubitState::G {
                assert!(j.is_none());
            }
            if let Some(t) = j {
                assert!(*t >= 0.0 && *t < 200e-9);
            }
        }
        // P(jump in 200 ns | e) = 1 − e^{−0.2}
        let n_e = batch.labels.iter().filter(|l| **l == QubitState::E).count() as f64;
        let n_j = batch.jump_times.iter().filter(|j| j.is_some()).count() as f64;
        let p = 1.0 - (-0.2f64).exp();
        assert!((n_j / n_e - p).abs() < 4.0 * (p * (1.0 - p) / n_e).sqrt());
    }

    #[test]
    fn infinite_lifetime_chains_are_constant() {
        let r = readout(5.0 * KAPPA, 300, 1.0);
        let mut cfg = ShotConfig::new(r, 500, 5);
        cfg.n_repeats = 6;
        let res = chain_measure(&cfg, 2.0).unwrap();
        assert_eq!(res.metrics.qndness, Some(1.0));
        assert_eq!(res.metrics.f_total, 1.0);
        for chain in res.batch.labels.chunks(6) {
            assert!(chain.iter().all(|l| *l == chain[0]));
        }
        assert_eq!(res.latched, res.batch.labels);
    }

    #[test]
    fn threshold_search_finds_midpoint_for_equal_gaussians() {
        let r = readout(0.25 * KAPPA, 300, 1.0);
        let batch = simulate_shots(&ShotConfig::new(r, 100_000, 11)).unwrap();
        let m = assign_and_score(&batch, None).unwrap();
        let mid = 0.5 * (m.mu_g + m.mu_e);
        assert!((m.threshold - mid).abs() < 0.3, "{} vs {mid}", m.threshold);
    }

    #[test]
    fn fit_is_robust_to_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut v: Vec<f64> = (0..100_000).map(|_| 2.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        v.extend(std::iter::repeat_n(50.0, 500));
        let f = fit_gaussian(&v).unwrap();
        assert!((f.mean - 2.0).abs() < 0.01);
        assert!((f.sigma - 0.5).abs() < 0.01);
    }

    #[test]
    fn latching_filter_ignores_single_outliers_inside_band() {
        let m = ReadoutMetrics {
            snr_measured: 0.0,
            sigma_i: 1.0,
            mu_g: 0.0,
            mu_e: 6.0,
            separation_sigmas: 6.0,
            discrimination_power: 1.0,
            f_g: 1.0,
            f_e: 1.0,
            f_total: 1.0,
            qndness: None,
            threshold: 3.0,
            discarded_fraction: None,
        };
        let l = latch(&[0.1, 3.5, -0.2, 4.5, 5.9, 2.5, 1.5, 0.0], &m, 2.0);
        use QubitState::{E, G};
        assert_eq!(l, vec![G, G, G, E, E, E, G, G]);
    }

    #[test]
    fn histogram_marginals() {
        let r = readout(0.3 * KAPPA, 300, 0.6);
        let mut cfg = ShotConfig::new(r, 10_000, 9);
        cfg.q_variance_ratio = 0.5;
        let batch = simulate_shots(&cfg).unwrap();
        let h = histogram(&batch, 40, 0.6).unwrap();
        let total: u64 = h.marginal_i(QubitState::G).iter().chain(&h.marginal_i(QubitState::E)).sum();
        assert_eq!(total as usize, batch.len());
        assert_relative_eq!(h.i_edges_lossless[5], h.i_edges[5] / 0.6f64.sqrt());
        assert!(h.fit_reliable);
        // Q is squeezed relative to I
        let (_, vq) = mean_var(&batch.q_vals);
        assert!((vq - 0.5).abs() < 0.05);
    }

    #[test]
    fn invalid_configs_rejected() {
        let r = readout(0.3 * KAPPA, 50, 0.6);
        let mut cfg = ShotConfig::new(r.clone(), 0, 0);
        assert!(simulate_shots(&cfg).is_err());
        cfg.n_shots = 10;
        cfg.t1 = 0.0;
        assert!(simulate_shots(&cfg).is_err());
        cfg.t1 = 1.0;
        cfg.init_state = InitState::Thermal(1.5);
        assert!(simulate_shots(&cfg).is_err());
        let mut bad = ShotConfig::new(r, 10, 0);
        bad.readout.env = DemodEnvelope::boxcar(3, 1e-9);
        assert!(matches!(simulate_shots(&bad), Err(Error::Shape { .. })));
    }
}
