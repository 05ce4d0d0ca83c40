//! Command-line front end: scenario generation, model fitting, penalty
//! selection, evaluation, the multi-seed benchmark harness, and raw-data
//! ingestion.
//!
//! Exit codes follow the error taxonomy of the core crate: `0` success,
//! `1` validation (bad flags, configs, or data), `2` solver failure
//! (including stationarity certificates above the gate), `3` I/O or
//! serialization failure. The `TVISING_THREADS` environment variable caps
//! the worker-thread count of the per-node fits.

use std::process;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use tvising::ErrorCategory;

mod evaluate;
mod experiment;
mod fit;
mod generate;
mod ingest;
mod select;
mod support;

#[derive(Parser)]
#[command(
    name = "tvising",
    version,
    about = "Estimate piece-wise constant Ising graphs from binary time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic scenario and write its dataset and ground truth
    Generate(generate::GenerateArgs),
    /// Fit a model at fixed penalty weights
    Fit(fit::FitArgs),
    /// Search penalty weights by AIC or held-out AUC
    Select(select::SelectArgs),
    /// Score an estimated model against a ground-truth model
    Evaluate(evaluate::EvaluateArgs),
    /// Run a multi-seed, multi-method benchmark and aggregate the metrics
    Experiment(experiment::ExperimentArgs),
    /// Convert a raw matrix of ±1/blank entries into a dataset file
    Ingest(ingest::IngestArgs),
}

fn run(cli: Cli) -> tvising::Result<()> {
    support::configure_threads()?;
    match cli.command {
        Command::Generate(args) => generate::run(&args),
        Command::Fit(args) => fit::run(&args),
        Command::Select(args) => select::run(&args),
        Command::Evaluate(args) => evaluate::run(&args),
        Command::Experiment(args) => experiment::run(&args),
        Command::Ingest(args) => ingest::run(&args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help / --version are successes; anything else is a
            // validation failure under this binary's exit-code contract.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        process::exit(match err.category() {
            ErrorCategory::Validation => 1,
            ErrorCategory::Solver => 2,
            ErrorCategory::Io => 3,
        });
    }
}
