//! One runner per named experiment. Each returns its tables and a JSON summary.

use num_complex::Complex64;
use serde_json::json;

use super::config::*;
use crate::cavitydyn::{
    design_depletion, evolve_combined, evolve_longitudinal, evolve_longitudinal_from, ConditionalTrajectory,
};
use crate::demod::{optimal_envelope, snr_numeric, DemodEnvelope, SnrCurve, SnrFormula};
use crate::dephase::{
    extract_efficiency, measurement_dephasing, spectator_dephasing, synthesize_calibration, tune_cancellation,
    CancellationSetup, SpectatorConfig,
};
use crate::driveframe::{make_envelope, solve_frame, DriveEnvelope, Segment};
use crate::shotsim::{assign_and_score, chain_measure, histogram, simulate_shots, ReadoutSpec, ShotConfig};
use crate::sysmodel::{hz_to_rad, rad_to_hz, SystemParams};
use crate::table::{Cell, Table};
use crate::{Error, Result};

pub struct Outputs {
    pub tables: Vec<(&'static str, Table)>,
    pub summary: serde_json::Value,
}

/// A readout pulse with its trajectory and demodulation envelope.
#[derive(Clone, Debug)]
pub struct BuiltReadout {
    pub traj: ConditionalTrajectory,
    pub env: DemodEnvelope,
    pub zeta: Vec<Complex64>,
    /// Separation of the state means in σ units, `√2·SNR`.
    pub separation: f64,
    /// Factor applied to the configured coupling.
    pub coupling_scale: f64,
}

fn readout_for(
    zeta: &[Complex64],
    chi: f64,
    kappa: f64,
    dt: f64,
    choice: EnvelopeChoice,
    eta: f64,
) -> Result<BuiltReadout> {
    let traj =
        if chi == 0.0 { evolve_longitudinal(zeta, kappa, dt)? } else { evolve_combined(0.0, zeta, chi, kappa, dt)? };
    let env = match choice {
        EnvelopeChoice::Optimal => optimal_envelope(&traj)?,
        EnvelopeChoice::Boxcar => DemodEnvelope::boxcar_for(&traj),
    };
    let snr = *snr_numeric(&traj, &env, None, eta)?.snr.last().expect("non-empty");
    Ok(BuiltReadout { traj, env, zeta: zeta.to_vec(), separation: 2f64.sqrt() * snr, coupling_scale: 1.0 })
}

/// Builds the readout described by `cfg`, rescaling the coupling to hit
/// `target_separation` when one is given.
pub fn build_readout(sys: &SystemParams, cfg: &ReadoutConfig, eta: f64) -> Result<BuiltReadout> {
    let segments: Vec<Segment> = cfg.segments.iter().map(|s| s.to_segment()).collect();
    let profile = make_envelope(&segments, cfg.dt_s)?;
    let chi = hz_to_rad(cfg.chi_hz);
    let mut built = readout_for(&profile.samples, chi, sys.kappa, cfg.dt_s, cfg.envelope, eta)?;
    if let Some(target) = cfg.target_separation {
        if !(target > 0.0) {
            return Err(Error::validation("target_separation", "must be > 0"));
        }
        let mut scale = 1.0;
        // separation is linear in ζ when χ = 0; a few passes absorb χ ≠ 0
        for _ in 0..6 {
            if built.separation == 0.0 {
                return Err(Error::domain("build_readout", "readout carries no information"));
            }
            scale *= target / built.separation;
            let zeta: Vec<Complex64> = profile.samples.iter().map(|z| z * scale).collect();
            built = readout_for(&zeta, chi, sys.kappa, cfg.dt_s, cfg.envelope, eta)?;
            if (built.separation - target).abs() < 1e-12 * target {
                break;
            }
        }
        built.coupling_scale = scale;
    }
    Ok(built)
}

pub fn snr_sweep(sys: &SystemParams, p: &SnrSweep) -> Result<Outputs> {
    let eta = p.eta.unwrap_or(sys.eta);
    let c = hz_to_rad(p.coupling_hz);
    let chi = p.chi_hz.map_or(sys.kappa, hz_to_rad);
    let formula = match p.formula.as_str() {
        "dispersive-boxcar" => SnrFormula::DispersiveBoxcar { eps: c, chi },
        "dispersive-optimal" => SnrFormula::DispersiveOptimal { eps: c, chi },
        "longitudinal-boxcar" => SnrFormula::LongitudinalBoxcar { zeta: c },
        "longitudinal-optimal" => SnrFormula::LongitudinalOptimal { zeta: c },
        other => return Err(Error::validation("formula", format!("unknown formula `{other}`"))),
    };
    let tau: Vec<f64> = p.kappa_tau.values("kappa_tau")?.iter().map(|x| x / sys.kappa).collect();
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::validation("eta", format!("must lie in (0, 1], got {eta}")));
    }
    let curve = SnrCurve::from_formula(formula, sys.kappa, eta, tau);
    let mut t = Table::new(&["tau_s", "snr"]);
    for (a, b) in curve.tau.iter().zip(&curve.snr) {
        t.push(vec![(*a).into(), (*b).into()]);
    }
    let crossing = curve.tau.iter().zip(&curve.snr).find(|(_, s)| **s >= 1.0).map(|(t, _)| *t);
    Ok(Outputs {
        tables: vec![("snr", t)],
        summary: json!({
            "formula": curve.label,
            "eta": eta,
            "kappa": sys.kappa,
            "first_tau_with_snr_above_1_s": crossing,
        }),
    })
}

fn shot_config(sys: &SystemParams, built: &BuiltReadout, n: usize, seed: u64) -> ShotConfig {
    let readout = ReadoutSpec { traj: built.traj.clone(), env: built.env.clone(), eta: sys.eta, phase: None };
    let mut cfg = ShotConfig::new(readout, n, seed);
    cfg.t1 = 1.0 / sys.gamma1;
    cfg
}

pub fn histogram_exp(sys: &SystemParams, p: &Histogram, seed: u64) -> Result<Outputs> {
    let built = build_readout(sys, &p.readout, sys.eta)?;
    let mut cfg = shot_config(sys, &built, p.n_shots, seed);
    cfg.q_variance_ratio = p.q_variance_ratio;
    if !p.relaxation {
        cfg.t1 = f64::INFINITY;
    }
    let batch = simulate_shots(&cfg)?;
    let metrics = assign_and_score(&batch, None)?;
    let hist = histogram(&batch, p.bins, sys.eta)?;
    let mut t = Table::new(&["i_lo", "i_hi", "i_lo_lossless", "q_lo", "q_hi", "count_g", "count_e"]);
    for a in 0..p.bins {
        for b in 0..p.bins {
            t.push(vec![
                hist.i_edges[a].into(),
                hist.i_edges[a + 1].into(),
                hist.i_edges_lossless[a].into(),
                hist.q_edges[b].into(),
                hist.q_edges[b + 1].into(),
                (hist.counts_g[a][b] as usize).into(),
                (hist.counts_e[a][b] as usize).into(),
            ]);
        }
    }
    let mut tables = vec![("histogram", t)];
    if p.write_shots {
        tables.push(("shots", shots_table(&batch, None)));
    }
    Ok(Outputs {
        tables,
        summary: json!({
            "metrics": metrics,
            "expected_separation": built.separation,
            "coupling_scale": built.coupling_scale,
            "zeta0_hz": rad_to_hz(built.zeta[0].re),
        }),
    })
}

fn shots_table(batch: &crate::shotsim::ShotBatch, latched: Option<&[crate::QubitState]>) -> Table {
    let mut cols = vec!["shot_idx", "repeat_idx", "init_label", "i_val", "q_val", "jump_time_s"];
    if latched.is_some() {
        cols.push("latched");
    }
    let mut t = Table::new(&cols);
    for k in 0..batch.len() {
        let mut row: Vec<Cell> = vec![
            (k / batch.n_repeats).into(),
            (k % batch.n_repeats).into(),
            batch.labels[k].label().into(),
            batch.i_vals[k].into(),
            batch.q_vals[k].into(),
            batch.jump_times[k].into(),
        ];
        if let Some(l) = latched {
            row.push(l[k].label().into());
        }
        t.push(row);
    }
    t
}

pub fn qnd_chain(sys: &SystemParams, p: &QndChain, seed: u64) -> Result<Outputs> {
    let built = build_readout(sys, &p.readout, sys.eta)?;
    let mut cfg = shot_config(sys, &built, p.n_chains, seed);
    cfg.n_repeats = p.n_repeats;
    cfg.excitation_rate = p.excitation_rate_hz;
    cfg.q_variance_ratio = p.q_variance_ratio;
    let res = chain_measure(&cfg, p.latch_k)?;
    let window = built.traj.duration();
    let mut trace = Table::new(&["repeat_idx", "i_val", "true_label", "latched"]);
    for r in 0..p.n_repeats {
        trace.push(vec![
            r.into(),
            res.batch.i_vals[r].into(),
            res.batch.labels[r].label().into(),
            res.latched[r].label().into(),
        ]);
    }
    let mut tables = vec![("trace", trace)];
    if p.write_shots {
        tables.push(("shots", shots_table(&res.batch, Some(&res.latched))));
    }
    Ok(Outputs {
        tables,
        summary: json!({
            "metrics": res.metrics,
            "expected_separation": built.separation,
            "coupling_scale": built.coupling_scale,
            "window_s": window,
            "flip_probability_per_window": -(-window * sys.gamma1).exp_m1(),
        }),
    })
}

pub fn spectator_echo(sys: &SystemParams, p: &SpectatorEcho, seed: u64, derived_chi_qc: f64) -> Result<Outputs> {
    let built = build_readout(sys, &p.readout, sys.eta)?;
    let chi_s = p.chi_spectator_hz.map_or(derived_chi_qc, hz_to_rad);
    let mut t = Table::new(&["n_echo", "contrast_ratio", "stderr", "analytic_ratio", "stark_phase"]);
    for &n in &p.n_echo {
        let cfg = SpectatorConfig {
            chi_spectator: chi_s,
            n_echo: n,
            sequence_length: p.sequence_length_s,
            measurement_on: true,
            traj: built.traj.clone(),
            measurement_start: p.measurement_start_s,
            n_samples: p.n_samples,
            seed,
        };
        let r = spectator_dephasing(&cfg)?;
        t.push(vec![n.into(), r.contrast_ratio.into(), r.stderr.into(), r.analytic_ratio.into(), r.stark_phase.into()]);
    }
    let steady: f64 = built.traj.alpha_e.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    Ok(Outputs {
        tables: vec![("spectator", t)],
        summary: json!({
            "chi_spectator_hz": rad_to_hz(chi_s),
            "max_photons": steady,
            "gamma_d_steady_per_s": steady * chi_s * chi_s / sys.kappa,
        }),
    })
}

pub fn efficiency_calib(sys: &SystemParams, p: &EfficiencyCalib, seed: u64) -> Result<Outputs> {
    let built = build_readout(sys, &p.readout, 1.0)?;
    let eta = p.eta_true.unwrap_or(sys.eta);
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::validation("eta_true", format!("must lie in (0, 1], got {eta}")));
    }
    let gamma_unit = measurement_dephasing(&built.traj, 1.0)?.gamma_m;
    let amps = p.amps.values("amps")?;
    let data = synthesize_calibration(gamma_unit, eta, &amps, p.baseline_contrast, p.rel_noise, seed);
    let fit = extract_efficiency(&data)?;
    let mut t = Table::new(&["amp", "contrast", "snr"]);
    for ((a, c), (_, s)) in data.ramsey.iter().zip(&data.snr) {
        t.push(vec![(*a).into(), (*c).into(), (*s).into()]);
    }
    Ok(Outputs {
        tables: vec![("calibration", t)],
        summary: json!({ "fit": fit, "eta_true": eta, "gamma_m_unit": gamma_unit }),
    })
}

pub fn cancellation_tune(sys: &SystemParams, p: &CancellationTune) -> Result<Outputs> {
    let segments: Vec<Segment> = p.readout.segments.iter().map(|s| s.to_segment()).collect();
    let profile = make_envelope(&segments, p.readout.dt_s)?;
    let setup = CancellationSetup {
        leakage: Complex64::new(p.leakage_re, p.leakage_im),
        drive_eps: hz_to_rad(p.leak_drive_hz),
        zeta: profile.samples,
        chi: hz_to_rad(p.readout.chi_hz),
        kappa: sys.kappa,
        dt: p.readout.dt_s,
        eta: sys.eta,
    };
    let r = tune_cancellation(&setup, &p.amps.values("amps")?, &p.phases.values("phases")?)?;
    let mut t = Table::new(&["amp", "phase", "residual"]);
    for (a, row) in r.amps.iter().zip(&r.residual) {
        for (ph, v) in r.phases.iter().zip(row) {
            t.push(vec![(*a).into(), (*ph).into(), (*v).into()]);
        }
    }
    let best = r.residual.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(Outputs {
        tables: vec![("residual", t)],
        summary: json!({
            "best_amp": r.best_amp,
            "best_phase": r.best_phase,
            "residual_at_optimum": best,
            "on_boundary": r.on_boundary,
        }),
    })
}

pub fn depletion_design(sys: &SystemParams, p: &DepletionDesign) -> Result<Outputs> {
    let zeta0 = hz_to_rad(p.zeta_hz);
    let n_ring = (p.ring_time_s / p.dt_s).round() as usize;
    if n_ring == 0 {
        return Err(Error::validation("ring_time_s", "must span at least one step"));
    }
    let ring = evolve_longitudinal(&vec![Complex64::new(zeta0, 0.0); n_ring], sys.kappa, p.dt_s)?;
    let a0 = *ring.alpha_e.last().expect("non-empty");
    let t_star = design_depletion(a0, zeta0, p.multiplier, sys.kappa)?;
    // ideal depletion on a grid that lands exactly on t*
    let n_dep = ((t_star / p.dt_s).ceil() as usize).max(1);
    let dep = evolve_longitudinal_from(
        a0,
        &vec![Complex64::new(p.multiplier * zeta0, 0.0); n_dep],
        sys.kappa,
        t_star / n_dep as f64,
    )?;
    let residual = dep.alpha_e.last().expect("non-empty").norm();
    let applied = match p.applied_duration_s {
        Some(d) => {
            let n = ((d / p.dt_s).round() as usize).max(1);
            let run =
                evolve_longitudinal_from(a0, &vec![Complex64::new(p.multiplier * zeta0, 0.0); n], sys.kappa, p.dt_s)?;
            Some(run.alpha_e.last().expect("non-empty").norm())
        }
        None => None,
    };
    let mut t = Table::new(&["t_s", "re_alpha_e", "im_alpha_e", "photons"]);
    for (k, a) in ring.alpha_e.iter().enumerate() {
        t.push(vec![(k as f64 * p.dt_s).into(), a.re.into(), a.im.into(), a.norm_sqr().into()]);
    }
    for (k, a) in dep.alpha_e.iter().enumerate().skip(1) {
        t.push(vec![(ring.duration() + k as f64 * dep.dt).into(), a.re.into(), a.im.into(), a.norm_sqr().into()]);
    }
    Ok(Outputs {
        tables: vec![("depletion", t)],
        summary: json!({
            "alpha0_abs": a0.norm(),
            "depletion_time_s": t_star,
            "residual_abs": residual,
            "applied_duration_s": p.applied_duration_s,
            "residual_abs_applied": applied,
        }),
    })
}

pub fn frame_check(sys: &SystemParams, p: &FrameCheck) -> Result<Outputs> {
    let detuning = if p.use_filter { sys.filter_detuning() } else { sys.detuning() };
    let dt = p.dt_s.unwrap_or(0.05 / detuning.abs());
    let eps = p.xi * detuning.abs();
    let mut t = Table::new(&["ramp_s", "resonant_residual", "relative_residual", "zeta_hz"]);
    for &ramp in &p.ramp_s {
        let mut segs = Vec::new();
        if ramp > 0.0 {
            segs.push(Segment::ramp(eps, ramp));
            segs.push(Segment::constant(eps, p.hold_s));
        } else {
            segs.push(Segment::constant(eps, p.hold_s));
        }
        let env: DriveEnvelope = make_envelope(&segs, dt)?;
        let sol = solve_frame(&env, sys, p.use_filter)?;
        let zeta = sol.zeta.last().expect("non-empty").norm();
        t.push(vec![
            ramp.into(),
            sol.resonant_residual.into(),
            (sol.resonant_residual / p.xi).into(),
            rad_to_hz(zeta).into(),
        ]);
    }
    Ok(Outputs {
        tables: vec![("frame", t)],
        summary: json!({ "detuning_hz": rad_to_hz(detuning), "dt_s": dt, "xi": p.xi }),
    })
}
