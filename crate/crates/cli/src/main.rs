//! `flowspect`: spectral anomaly detection over binned flow traces.
//!
//! Subcommands: `detect` scores a series with the configured detectors,
//! `simulate` produces a labeled synthetic trace, `evaluate` turns detection
//! files plus ground truth into ROC/AUC/counts/feature-map CSVs, and `sweep`
//! grids over the detector parameters. Exit codes distinguish parse (2),
//! parameter (3), I/O (4), and alignment (5) failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowspect_core::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "flowspect",
    version,
    about = "Flow-trace anomaly detection toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Input series CSV (overrides `input`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for all randomness (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Window length (overrides `ell`).
    #[arg(long, global = true)]
    ell: Option<usize>,

    /// Retained components: an integer, `auto`, or `auto:<cutoff>`.
    #[arg(long, global = true)]
    k: Option<String>,

    /// Target false-alarm rate for the Q-statistic threshold.
    #[arg(long, global = true)]
    beta: Option<f64>,

    /// Comma-separated detector list (mssa,fourier,wavelet,kalman,astute).
    #[arg(long, global = true)]
    detectors: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run detectors over a binned series and write detection CSVs.
    Detect,
    /// Generate a labeled synthetic trace (series.csv + truth.csv).
    Simulate,
    /// Evaluate detection CSVs against ground truth.
    Evaluate,
    /// Grid-sweep detector parameters and evaluate each point.
    Sweep,
}

fn build_config(cli: &Cli) -> flowspect_core::Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        for (key, value) in RunConfig::read_file(path)? {
            config.apply(&key, &value)?;
        }
    }
    if let Some(v) = &cli.input {
        config.input = Some(v.clone());
    }
    if let Some(v) = &cli.out {
        config.out = v.clone();
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(v) = cli.ell {
        config.ell = v;
    }
    if let Some(v) = &cli.k {
        config.apply("k", v)?;
    }
    if let Some(v) = cli.beta {
        config.beta = v;
    }
    if let Some(v) = &cli.detectors {
        config.apply("detectors", v)?;
    }
    Ok(config)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => 2,
        Error::Parameter { .. } | Error::Shape(_) | Error::Rank(_) => 3,
        Error::Io(_) => 4,
        Error::Alignment(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> flowspect_core::Result<()> {
        let config = build_config(&cli)?;
        match cli.command {
            Command::Detect => commands::cmd_detect(&config),
            Command::Simulate => commands::cmd_simulate(&config),
            Command::Evaluate => commands::cmd_evaluate(&config),
            Command::Sweep => commands::cmd_sweep(&config),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
