//! Batch runner for the `sigma-core` verifiers: configuration files,
//! parallel execution, CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod executor;
pub mod experiments;
pub mod registry;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use sigma_core::Engine;

pub use config::{ConfigError, RunConfig};
pub use executor::RayonExecutor;
pub use experiments::{run_experiment, Outcome};

pub const SEED_ENV: &str = "SIGMA_LAB_SEED";
pub const DEFAULT_OUT: &str = "sigma-lab-out";

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numeric error: {0}")]
    Numeric(#[from] sigma_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Numeric(_) | Self::Io(_) => exit::NUMERIC,
        }
    }
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub out_dir: PathBuf,
}

/// Validates `config_path`, runs it on `workers` threads and writes
/// `results.csv` and `summary.json` into the output directory. Nothing is
/// written when validation fails.
pub fn run(config_path: &Path, workers: usize, out: Option<&Path>) -> Result<RunSummary, RunError> {
    let seed = std::env::var(SEED_ENV).ok();
    let cfg = RunConfig::from_file(config_path, seed.as_deref())?;
    if workers == 0 {
        return Err(ConfigError { line: None, message: "--workers must be >= 1".into() }.into());
    }
    let out_dir =
        out.map(Path::to_path_buf).or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let executor = RayonExecutor::new(workers)?;
    let engine = Engine::new(cfg.master_seed, &executor);
    let start = Instant::now();
    let outcome = run_experiment(&cfg, &engine)?;
    let runtime = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(&out_dir)?;
    report::write_csv(&out_dir.join("results.csv"), &cfg, &outcome)?;
    report::write_summary(&out_dir.join("summary.json"), &cfg, &outcome, runtime)?;
    Ok(RunSummary { outcome, out_dir })
}
