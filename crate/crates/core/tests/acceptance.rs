//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use cdreadout::cavitydyn::{
    dispersive_closed_form, evolve_combined, evolve_dispersive, evolve_longitudinal, longitudinal_closed_form,
};
use cdreadout::cli::config::{EnvelopeChoice, ExperimentConfig, ReadoutConfig, SegmentConfig};
use cdreadout::cli::experiments::build_readout;
use cdreadout::cli::{load_config, run_experiment};
use cdreadout::demod::{
    fit_loglog_slope, log_grid, optimal_envelope, snr_numeric, DemodEnvelope, SnrCurve, SnrFormula,
};
use cdreadout::dephase::{
    extract_efficiency, measurement_dephasing, spectator_dephasing, synthesize_calibration, tune_cancellation,
    CancellationSetup, SpectatorConfig,
};
use cdreadout::driveframe::SegmentKind;
use cdreadout::shotsim::{assign_and_score, chain_measure, simulate_shots, ReadoutSpec, ShotConfig};
use cdreadout::sysmodel::{derive_couplings, hz_to_rad, SystemParams};
use cdreadout::{Complex64, QubitState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const KAPPA: f64 = 1e7;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    if b.norm() == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / b.norm()
    }
}

fn reference() -> SystemParams {
    SystemParams::reference_device()
}

/// 750 ns at ζ₀ followed by 120 ns at −2ζ₀, ζ₀/2π = 1.28 MHz.
fn reference_pulse(target_separation: Option<f64>) -> ReadoutConfig {
    ReadoutConfig {
        dt_s: 1e-9,
        segments: vec![
            SegmentConfig { kind: SegmentKind::Constant, amplitude: 1.28e6, duration_s: 750e-9 },
            SegmentConfig { kind: SegmentKind::Reversal, amplitude: -2.0, duration_s: 120e-9 },
        ],
        chi_hz: 0.0,
        envelope: EnvelopeChoice::Optimal,
        target_separation,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let dt = 1e-9;
    let mut worst: f64 = 0.0;
    for chi in [KAPPA, KAPPA / 3.0] {
        let eps = 0.4 * KAPPA;
        let traj = evolve_dispersive(eps, chi, KAPPA, 2e-6, dt).unwrap();
        for (n, t) in traj.times().enumerate() {
            for s in [QubitState::G, QubitState::E] {
                worst = worst.max(rel(traj.alpha(s)[n], dispersive_closed_form(c(eps), chi, KAPPA, s.sigma_z(), t)));
            }
        }
    }
    let zeta = c(hz_to_rad(1.28e6));
    let traj = evolve_longitudinal(&vec![zeta; 2000], KAPPA, dt).unwrap();
    for (n, t) in traj.times().enumerate() {
        for s in [QubitState::G, QubitState::E] {
            worst = worst.max(rel(traj.alpha(s)[n], longitudinal_closed_form(zeta, KAPPA, s.sigma_z(), t, c(0.0))));
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-9 && within(elapsed, 1.0),
        detail: format!("max relative deviation {worst:.2e} (< 1e-9), {:.3} s (< 1 s)", elapsed.as_secs_f64()),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let dt = 1e-4 / KAPPA;
    let n = 200_000;
    let coupling = hz_to_rad(1.28e6);
    let long = evolve_longitudinal(&vec![c(coupling); n], KAPPA, dt).unwrap();
    let disp = evolve_dispersive(coupling, KAPPA, KAPPA, n as f64 * dt, dt).unwrap();
    let cases = [
        (&long, false, SnrFormula::LongitudinalBoxcar { zeta: coupling }),
        (&long, true, SnrFormula::LongitudinalOptimal { zeta: coupling }),
        (&disp, false, SnrFormula::DispersiveBoxcar { eps: coupling, chi: KAPPA }),
        (&disp, true, SnrFormula::DispersiveOptimal { eps: coupling, chi: KAPPA }),
    ];
    let samples: Vec<usize> = log_grid(0.01, 20.0, 60).iter().map(|x| (x / KAPPA / dt).round() as usize).collect();
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for (traj, optimal, formula) in cases {
        let env = if optimal { optimal_envelope(traj).unwrap() } else { DemodEnvelope::boxcar_for(traj) };
        let curve = snr_numeric(traj, &env, None, 1.0).unwrap();
        let mut w: f64 = 0.0;
        for &k in &samples {
            let exact = formula.eval(KAPPA, curve.tau[k]);
            w = w.max((curve.snr[k] - exact).abs() / exact);
        }
        parts.push(format!("{} {w:.1e}", formula.label()));
        worst = worst.max(w);
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-6 && within(elapsed, 5.0),
        detail: format!("{} (< 1e-6), {:.2} s (< 5 s)", parts.join(", "), elapsed.as_secs_f64()),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let small = log_grid(1e-3, 1e-2, 50);
    let large = log_grid(100.0, 1000.0, 50);
    let slope = |f: SnrFormula, grid: &[f64]| {
        let curve = SnrCurve::from_formula(f, 1.0, 1.0, grid.to_vec());
        fit_loglog_slope(&curve, (grid[0], grid[grid.len() - 1])).unwrap().0
    };
    let lb = SnrFormula::LongitudinalBoxcar { zeta: 1.0 };
    let lo = SnrFormula::LongitudinalOptimal { zeta: 1.0 };
    let db = SnrFormula::DispersiveBoxcar { eps: 1.0, chi: 1.0 };
    let dopt = SnrFormula::DispersiveOptimal { eps: 1.0, chi: 1.0 };
    let checks = [
        ("longitudinal-boxcar small", slope(lb, &small), 1.5, 0.02),
        ("longitudinal-optimal small", slope(lo, &small), 1.5, 0.02),
        ("dispersive-boxcar small", slope(db, &small), 2.5, 0.05),
        ("longitudinal-boxcar large", slope(lb, &large), 0.5, 0.02),
        ("longitudinal-optimal large", slope(lo, &large), 0.5, 0.02),
        ("dispersive-boxcar large", slope(db, &large), 0.5, 0.02),
        ("dispersive-optimal large", slope(dopt, &large), 0.5, 0.02),
    ];
    let pass = checks.iter().all(|(_, s, want, tol)| (s - want).abs() <= *tol);
    let detail = checks.iter().map(|(n, s, w, t)| format!("{n} {s:.4} ({w}±{t})")).collect::<Vec<_>>().join(", ");
    let elapsed = start.elapsed();
    Outcome { pass: pass && within(elapsed, 1.0), detail: format!("{detail}, {:.3} s", elapsed.as_secs_f64()) }
}

fn criterion_4() -> Outcome {
    let zeta = hz_to_rad(1.28e6);
    let traj = evolve_longitudinal(&vec![c(zeta); 5000], KAPPA, 1e-9).unwrap();
    let sep = traj.separation()[5000];
    let photons = sep * sep;
    Outcome { pass: (photons - 2.59).abs() <= 0.01, detail: format!("|α_m|² = {photons:.5} (2.59 ± 0.01)") }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let sys = reference();
    let built = build_readout(&sys, &reference_pulse(Some(5.8)), sys.eta).unwrap();
    let readout = ReadoutSpec { traj: built.traj, env: built.env, eta: sys.eta, phase: None };
    let batch = simulate_shots(&ShotConfig::new(readout, 1_500_000, 0)).unwrap();
    let m = assign_and_score(&batch, None).unwrap();
    let mid = assign_and_score(&batch, Some(0.5 * (m.mu_g + m.mu_e))).unwrap();
    let oracle = Normal::standard().cdf(-5.8 / 2.0);
    let (n_g, n_e) = (batch.i_of(QubitState::G).len() as f64, batch.i_of(QubitState::E).len() as f64);
    let (p_eg, p_ge) = (1.0 - mid.f_g, 1.0 - mid.f_e);
    let z_g = (p_eg - oracle) / (oracle * (1.0 - oracle) / n_g).sqrt();
    let z_e = (p_ge - oracle) / (oracle * (1.0 - oracle) / n_e).sqrt();
    let elapsed = start.elapsed();
    let pass =
        (m.discrimination_power - 0.995).abs() <= 0.0015 && z_g.abs() < 3.0 && z_e.abs() < 3.0 && within(elapsed, 30.0);
    Outcome {
        pass,
        detail: format!(
            "discrimination {:.3}% (99.5 ± 0.15), separation {:.3}σ, midpoint p(e|g) {:.3e} (z = {z_g:.2}), p(g|e) {:.3e} (z = {z_e:.2}) vs Φ(−d/2) = {oracle:.3e}, {:.1} s (< 30 s)",
            100.0 * m.discrimination_power,
            m.separation_sigmas,
            p_eg,
            p_ge,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let sys = reference();
    let built = build_readout(&sys, &reference_pulse(Some(5.8)), sys.eta).unwrap();
    let readout = ReadoutSpec { traj: built.traj, env: built.env, eta: sys.eta, phase: None };
    let mut cfg = ShotConfig::new(readout, 100_000, 0);
    cfg.t1 = 90e-6;
    cfg.n_repeats = 10;
    let res = chain_measure(&cfg, 2.0).unwrap();
    let m = res.metrics;
    let q = m.qndness.unwrap();
    let elapsed = start.elapsed();
    let f_ok = (0.968..=0.988).contains(&m.f_total);
    let q_ok = (0.974..=0.994).contains(&q);
    Outcome {
        pass: f_ok && q_ok && within(elapsed, 60.0),
        detail: format!(
            "F = {:.3}% [96.8, 98.8] {}, Q = {:.3}% [97.4, 99.4] {}, F_g = {:.3}%, F_e = {:.3}%, {:.1} s (< 60 s)",
            100.0 * m.f_total,
            if f_ok { "ok" } else { "OUT" },
            100.0 * q,
            if q_ok { "ok" } else { "OUT" },
            100.0 * m.f_g,
            100.0 * m.f_e,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let sys = reference();
    let built = build_readout(&sys, &reference_pulse(None), 1.0).unwrap();
    let gamma_unit = measurement_dephasing(&built.traj, 1.0).unwrap().gamma_m;
    let amps: Vec<f64> = (1..=15).map(|k| 0.1 * k as f64).collect();
    let data = synthesize_calibration(gamma_unit, 0.6, &amps, 0.95, 0.005, 0);
    let fit = extract_efficiency(&data).unwrap();
    let elapsed = start.elapsed();
    Outcome {
        pass: (fit.eta - 0.6).abs() <= 0.02 && within(elapsed, 10.0),
        detail: format!("η = {:.4} (0.60 ± 0.02), {:.3} s (< 10 s)", fit.eta, elapsed.as_secs_f64()),
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let kappa = KAPPA * rng.random_range(0.5..2.0);
        let dt = 0.01 / kappa;
        let n = rng.random_range(200..2000);
        let z0 = kappa * rng.random_range(0.1..1.0);
        let zeta: Vec<Complex64> = (0..n).map(|k| if k < n * 4 / 5 { c(z0) } else { c(-2.0 * z0) }).collect();
        let chi = kappa * rng.random_range(0.0..1.0);
        let eps = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * kappa;
        let traj = evolve_combined(eps, &zeta, chi, kappa, dt).unwrap();
        let d = measurement_dephasing(&traj, 1.0).unwrap();
        worst = worst.max((d.snr_ref.powi(2) - 4.0 * d.gamma_m).abs() / (4.0 * d.gamma_m));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-6 && within(elapsed, 5.0),
        detail: format!(
            "max |SNR² − 4γ_m|/4γ_m = {worst:.2e} over 20 trajectories (< 1e-6), {:.2} s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let sys = reference();
    let chi_s = derive_couplings(&sys).unwrap().chi_qc;
    let built = build_readout(&sys, &reference_pulse(None), sys.eta).unwrap();
    let mut ratios = Vec::new();
    let mut worst_err: f64 = 0.0;
    for n in 0..=6 {
        let cfg = SpectatorConfig {
            chi_spectator: chi_s,
            n_echo: n,
            sequence_length: 1e-6,
            measurement_on: true,
            traj: built.traj.clone(),
            measurement_start: None,
            n_samples: 20_000,
            seed: 0,
        };
        let r = spectator_dephasing(&cfg).unwrap();
        worst_err = worst_err.max(r.stderr);
        ratios.push(r.contrast_ratio);
    }
    let elapsed = start.elapsed();
    let added = 1.0 - ratios[0];
    let pass = added <= 0.10 && ratios[3..].iter().all(|&r| r >= 0.99) && worst_err < 0.005 && within(elapsed, 60.0);
    let shown = ratios.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>().join(", ");
    Outcome {
        pass,
        detail: format!(
            "ratios N=0..6 [{shown}], N=0 adds {:.2}% (≤ 10%), max stderr {worst_err:.1e} (< 0.005), {:.1} s",
            100.0 * added,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let sys = reference();
    let segs: Vec<_> = reference_pulse(None).segments.iter().map(|s| s.to_segment()).collect();
    let profile = cdreadout::driveframe::make_envelope(&segs, 1e-9).unwrap();
    let setup = CancellationSetup {
        leakage: c(1.0),
        drive_eps: hz_to_rad(1e6),
        zeta: profile.samples,
        chi: 0.0,
        kappa: sys.kappa,
        dt: 1e-9,
        eta: sys.eta,
    };
    let amps: Vec<f64> = (0..=40).map(|k| 0.05 * k as f64).collect();
    let phases: Vec<f64> = (0..=72).map(|k| k as f64 * std::f64::consts::PI / 36.0).collect();
    let r = tune_cancellation(&setup, &amps, &phases).unwrap();
    let best = r.residual.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    let pass = (r.best_amp - 1.0).abs() < 1e-12
        && (r.best_phase - std::f64::consts::PI).abs() < 1e-12
        && best < 1e-10
        && within(elapsed, 5.0);
    Outcome {
        pass,
        detail: format!(
            "argmin amp {} phase {:.6} rad, residual {best:.1e} (< 1e-10), {:.2} s",
            r.best_amp,
            r.best_phase,
            elapsed.as_secs_f64()
        ),
    }
}

/// Every data file of `a` equals the file of the same name in `b`.
fn same_outputs(a: &Path, b: &Path) -> std::io::Result<bool> {
    let mut names: Vec<_> = std::fs::read_dir(a)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    names.sort();
    for name in names {
        if name == "manifest.json" {
            continue;
        }
        if std::fs::read(a.join(&name))? != std::fs::read(b.join(&name))? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn small_config(name: &str) -> ExperimentConfig {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut cfg = load_config(&dir.join(format!("{name}.json"))).unwrap();
    let v = serde_json::to_value(&cfg.experiment).unwrap();
    let mut v = v;
    for (key, small) in [("n_shots", 20_000), ("n_chains", 5_000), ("n_samples", 2_000)] {
        if v.get(key).is_some() {
            v[key] = small.into();
        }
    }
    cfg.experiment = serde_json::from_value(v).unwrap();
    cfg.seed = 7;
    cfg
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let names = ["snr_longitudinal", "histogram", "qnd_chain", "spectator_echo", "cancellation", "efficiency", "depletion", "frame"];
    let mut bad = Vec::new();
    for name in names {
        let mut runs = Vec::new();
        for threads in [1, 4] {
            let mut cfg = small_config(name);
            cfg.output.dir = tmp.path().join(format!("{name}-{threads}"));
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            runs.push(pool.install(|| run_experiment(&cfg)).unwrap());
        }
        if !same_outputs(&runs[0], &runs[1]).unwrap() {
            bad.push(name);
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} experiments byte-identical across 1 and 4 threads", names.len())
        } else {
            format!("differing outputs: {bad:?}")
        },
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("closed-form trajectories", criterion_1),
        ("SNR oracle equivalence", criterion_2),
        ("scaling exponents", criterion_3),
        ("steady-state photon number", criterion_4),
        ("discrimination power", criterion_5),
        ("fidelity and QND-ness", criterion_6),
        ("efficiency closed loop", criterion_7),
        ("γ_m–SNR identity", criterion_8),
        ("spectator echoes", criterion_9),
        ("cancellation tuning", criterion_10),
        ("determinism", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {:>2}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let out = run();
        println!("{} {id} ({name}): {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
