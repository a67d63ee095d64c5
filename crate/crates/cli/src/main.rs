//! `survcorn` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{BenchmarkArgs, EvaluateArgs, PredictArgs, SimulateArgs, TrainArgs};

/// Bad flags or configuration; reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "survcorn",
    version,
    about = "Discrete-time survival networks with conditional ordinal outputs"
)]
struct Cli {
    /// JSON run configuration; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation, fold assignment and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic cohort and write it as CSV.
    Simulate(SimulateArgs),
    /// Cross-validate a model and write per-fold checkpoints and logs.
    Train(TrainArgs),
    /// Score a checkpoint on a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Write survival curves for every patient in a dataset.
    Predict(PredictArgs),
    /// Compare SurvCORN against the discrete hazard baseline on shared folds.
    Benchmark(BenchmarkArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<survcorn::Error>() {
        Some(survcorn::Error::Numerical(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let result =
        config::RunConfig::load(cli.config.as_deref()).and_then(|file| match &cli.command {
            Command::Simulate(args) => commands::simulate(args, &file, cli.seed),
            Command::Train(args) => commands::train(args, &file, cli.seed),
            Command::Evaluate(args) => commands::evaluate(args, &file),
            Command::Predict(args) => commands::predict(args, &file),
            Command::Benchmark(args) => commands::benchmark(args, &file, cli.seed),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
