//! `evaluate`: score an estimated model against a ground-truth model —
//! normalized Hausdorff distance between change-point sets plus temporal
//! edge precision/recall/F1.

use std::path::PathBuf;

use clap::Args;

use tvising::io::{read_estimate, read_model, write_report};
use tvising::{evaluate, Error, Result};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated model JSON
    #[arg(long)]
    pub estimate: PathBuf,

    /// Ground-truth model JSON
    #[arg(long)]
    pub truth: PathBuf,

    /// Report output path (JSON); printed to stdout regardless
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let estimate = read_estimate(&args.estimate)?;
    let truth = read_model(&args.truth)?;
    if estimate.n() != truth.n() || estimate.p() != truth.p() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is (n = {}, p = {}) but truth is (n = {}, p = {})",
            estimate.n(),
            estimate.p(),
            truth.n(),
            truth.p()
        )));
    }

    let true_edges = (1..=truth.n())
        .map(|t| truth.edges_at(t))
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&estimate, truth.change_points(), &true_edges)?;

    if let Some(path) = &args.output {
        write_report(path, &report)?;
    }
    println!(
        "h = {:.4}  precision = {:.4}  recall = {:.4}  f1 = {:.4}  detected = {}",
        report.h_score, report.precision, report.recall, report.f1, report.num_detected
    );
    Ok(())
}
