//! The `cdreadout` command line: named experiments driven by JSON configs.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for numerical
//! failures. Every run writes its tables, a `summary.json` and a
//! `manifest.json` recording the resolved config, its SHA-256, the tool
//! version and the wall time. A manifest can be passed back as `--config`.

pub mod config;
pub mod experiments;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::sysmodel::derive_couplings;
use crate::table::{Format, Table};
use crate::{Error, Result};
use config::{Experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "cdreadout", version, about = "Conditional-displacement qubit readout experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment from a JSON config (or a previous manifest)
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on it
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Compare the SNR curves of two snr-sweep runs
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Also write the comparison table here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failed command with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn from_error(context: &str, e: Error) -> Self {
        let code = if e.is_config() { 1 } else { 2 };
        Failure { code, message: format!("{context}: {e}") }
    }
}

/// Parses a config, accepting either a plain config or a manifest.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("resolved_config") {
        value = inner.take();
    }
    Ok(serde_json::from_value(value)?)
}

fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs the experiment and writes all artifacts; returns the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<PathBuf, Failure> {
    let start = Instant::now();
    let name = cfg.experiment.name();
    let cfg_err = |e| Failure::from_error("config", e);
    let sys = cfg.system.to_params().map_err(cfg_err)?;
    let couplings = derive_couplings(&sys).map_err(|e| Failure::from_error("sysmodel::derive_couplings", e))?;
    let seed = cfg.seed;
    let outputs = match &cfg.experiment {
        Experiment::SnrSweep(p) => experiments::snr_sweep(&sys, p),
        Experiment::Histogram(p) => experiments::histogram_exp(&sys, p, seed),
        Experiment::QndChain(p) => experiments::qnd_chain(&sys, p, seed),
        Experiment::SpectatorEcho(p) => experiments::spectator_echo(&sys, p, seed, couplings.chi_qc),
        Experiment::EfficiencyCalib(p) => experiments::efficiency_calib(&sys, p, seed),
        Experiment::CancellationTune(p) => experiments::cancellation_tune(&sys, p),
        Experiment::DepletionDesign(p) => experiments::depletion_design(&sys, p),
        Experiment::FrameCheck(p) => experiments::frame_check(&sys, p),
    }
    .map_err(|e| Failure::from_error(name, e))?;

    let io = |e: Error| Failure::from_error("output", e);
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| io(e.into()))?;
    let mut files = Vec::new();
    for (stem, table) in &outputs.tables {
        let path = table.write(dir, stem, cfg.output.format).map_err(io)?;
        files.push(path.file_name().expect("file").to_string_lossy().into_owned());
    }
    let summary = serde_json::to_string_pretty(&outputs.summary).map_err(|e| io(e.into()))? + "\n";
    std::fs::write(dir.join("summary.json"), summary).map_err(|e| io(e.into()))?;
    files.push("summary.json".into());

    let manifest = serde_json::json!({
        "tool": "cdreadout",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": name,
        "config_sha256": config_hash(cfg).map_err(io)?,
        "seed": seed,
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": files,
        "resolved_config": cfg,
    });
    let manifest = serde_json::to_string_pretty(&manifest).map_err(|e| io(e.into()))? + "\n";
    std::fs::write(dir.join("manifest.json"), manifest).map_err(|e| io(e.into()))?;
    Ok(dir.clone())
}

fn run_command(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    format: Option<Format>,
) -> std::result::Result<String, Failure> {
    let mut cfg = load_config(config).map_err(|e| Failure::from_error("config", e))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    if let Some(f) = format {
        cfg.output.format = f;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure { code: 1, message: "config: invalid `threads`: must be ≥ 1".into() });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure { code: 2, message: format!("thread pool: {e}") })?;
    let dir = pool.install(|| run_experiment(&cfg))?;
    Ok(format!("{}: wrote {}", cfg.experiment.name(), dir.display()))
}

/// Ratio of two SNR curves on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub tau: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Times where the ratio crosses 1, linearly interpolated.
    pub crossovers: Vec<f64>,
    /// End of the initial stretch where curve A exceeds curve B.
    pub a_dominates_until: Option<f64>,
}

fn read_curve(dir: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let path = dir.join("snr.csv");
    let (cols, rows) = Table::read_csv(&path)?;
    if cols != ["tau_s", "snr"] {
        return Err(Error::Config(format!("{}: expected columns tau_s,snr", path.display())));
    }
    Ok(rows.into_iter().map(|r| (r[0], r[1])).unzip())
}

pub fn compare(a: &Path, b: &Path) -> Result<Comparison> {
    let (ta, sa) = read_curve(a)?;
    let (tb, sb) = read_curve(b)?;
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(y.abs())) {
        return Err(Error::shape("compare", "runs do not share a τ grid"));
    }
    let ratio: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| if *x == 0.0 && *y == 0.0 { 1.0 } else { x / y }).collect();
    let mut crossovers = Vec::new();
    for k in 1..ratio.len() {
        let (r0, r1) = (ratio[k - 1] - 1.0, ratio[k] - 1.0);
        if r0 != 0.0 && r0.signum() != r1.signum() && r1 != 0.0 {
            let f = r0 / (r0 - r1);
            crossovers.push(ta[k - 1] + f * (ta[k] - ta[k - 1]));
        }
    }
    let a_dominates_until =
        ratio.iter().position(|r| *r <= 1.0).map_or(
            ta.last().copied(),
            |k| {
                if k == 0 {
                    None
                } else {
                    Some(ta[k - 1])
                }
            },
        );
    Ok(Comparison { tau: ta, ratio, crossovers, a_dominates_until })
}

fn compare_command(a: &Path, b: &Path, out: Option<PathBuf>) -> std::result::Result<String, Failure> {
    let cmp = compare(a, b).map_err(|e| Failure::from_error("compare", e))?;
    let mut t = Table::new(&["tau_s", "ratio"]);
    for (x, r) in cmp.tau.iter().zip(&cmp.ratio) {
        t.push(vec![(*x).into(), (*r).into()]);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::from_error("output", e.into()))?;
        t.write(&dir, "compare", Format::Csv).map_err(|e| Failure::from_error("output", e))?;
    }
    let mut report = t.to_csv();
    report.push_str(&format!("# crossovers_s: {:?}\n", cmp.crossovers));
    report.push_str(&format!("# a_dominates_until_s: {:?}\n", cmp.a_dominates_until));
    Ok(report)
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run { config, seed, out, threads, format } => run_command(&config, seed, out, threads, format),
        Command::Compare { run_a, run_b, out } => compare_command(&run_a, &run_b, out),
    };
    match result {
        Ok(msg) => {
            println!("{}", msg.trim_end());
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
