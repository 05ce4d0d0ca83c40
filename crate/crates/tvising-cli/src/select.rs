//! `select`: search penalty weights over a grid or random cloud, scoring
//! each candidate by training AIC or held-out AUC, and write the winning
//! pair plus the full trace.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use tvising::io::write_trace_csv;
use tvising::{search, Criterion, EstimatorOptions, Result, SearchSpec};

use crate::support::{Method, SolverArgs};

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Training dataset file (.csv or .json)
    #[arg(long)]
    pub dataset: PathBuf,

    /// Holdout dataset file, required by the AUC criterion
    #[arg(long)]
    pub holdout: Option<PathBuf>,

    /// Search TOML config
    #[arg(long)]
    pub search: PathBuf,

    /// Estimation method
    #[arg(long, value_enum, default_value_t = Method::Tvifl)]
    pub method: Method,

    /// Output directory (created if absent)
    #[arg(long = "output-dir")]
    pub output_dir: PathBuf,

    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Winning pair as written to `best.json`.
#[derive(Serialize)]
struct BestRepr {
    method: &'static str,
    criterion: Criterion,
    lambda1: f64,
    lambda2: f64,
    criterion_value: f64,
}

pub fn run(args: &SelectArgs) -> Result<()> {
    let dataset = crate::support::read_dataset(&args.dataset)?;
    let holdout = args
        .holdout
        .as_deref()
        .map(crate::support::read_dataset)
        .transpose()?;
    let spec: SearchSpec = crate::support::read_toml(&args.search)?;
    let spec = args.method.constrained_spec(&spec);

    let outcome = search(
        &dataset,
        holdout.as_ref(),
        &spec,
        args.method.fused(),
        &args.solver.to_options(),
        &EstimatorOptions::default(),
    )?;

    let best_value = outcome
        .trace
        .iter()
        .find(|t| t.lambda1 == outcome.lambda1 && t.lambda2 == outcome.lambda2)
        .map(|t| t.criterion_value)
        .expect("winner is always a trace entry");

    fs::create_dir_all(&args.output_dir)?;
    write_trace_csv(args.output_dir.join("trace.csv"), &outcome.trace)?;
    let best = BestRepr {
        method: args.method.name(),
        criterion: spec.criterion,
        lambda1: outcome.lambda1,
        lambda2: outcome.lambda2,
        criterion_value: best_value,
    };
    fs::write(
        args.output_dir.join("best.json"),
        serde_json::to_string_pretty(&best).map_err(tvising::Error::from)?,
    )?;

    println!(
        "selected λ1 = {}, λ2 = {} ({:?} = {:.6}) over {} candidates -> {}",
        outcome.lambda1,
        outcome.lambda2,
        spec.criterion,
        best_value,
        outcome.trace.len(),
        args.output_dir.display()
    );
    Ok(())
}
