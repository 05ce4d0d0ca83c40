//! `experiment`: the benchmark harness. For each (seed, method) pair it
//! regenerates the scenario at that seed, selects penalty weights with the
//! configured search, fits at the winner, and scores against the ground
//! truth. Per-run artifacts land under `output_dir/<seed>/<method>/`;
//! failures are logged and skipped; the aggregate lands in `results.csv`
//! with one row per method (mean and standard deviation over the seeds).

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use tvising::io::{write_estimate, write_model, write_report, write_trace_csv};
use tvising::{
    fit_model, generate_scenario, search, Error, EstimatorOptions, EvaluationReport,
    GeneratedScenario, Result, ScenarioConfig, SearchSpec, SolverOptions,
};

use crate::support::{Method, SolverArgs};

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment TOML config
    #[arg(long)]
    pub config: PathBuf,

    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Declarative description of a benchmark run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Scenario template; its `seed` field is overridden per replicate.
    pub scenario: ScenarioConfig,
    /// Methods to compare (at least one).
    pub methods: Vec<Method>,
    /// Penalty search run once per (seed, method).
    pub search: SearchSpec,
    /// Replicate seeds (at least one).
    pub seeds: Vec<u64>,
    /// Root of all written artifacts.
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("experiment needs ≥ 1 method".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("experiment needs ≥ 1 seed".into()));
        }
        Ok(())
    }
}

/// Metrics of one successful (seed, method) run.
struct RunMetrics {
    h: f64,
    f1: f64,
    d_hat: f64,
}

pub fn run(args: &ExperimentArgs) -> Result<()> {
    let config: ExperimentConfig = crate::support::read_toml(&args.config)?;
    config.validate()?;
    let opts = args.solver.to_options();
    fs::create_dir_all(&config.output_dir)?;

    let mut per_method: Vec<Vec<RunMetrics>> =
        config.methods.iter().map(|_| Vec::new()).collect();
    let mut failures = 0usize;

    for &seed in &config.seeds {
        let mut scenario_config = config.scenario.clone();
        scenario_config.seed = seed;
        let seed_dir = config.output_dir.join(seed.to_string());

        let scenario = match generate_scenario(&scenario_config) {
            Ok(s) => s,
            Err(err) => {
                eprintln!("warning: seed {seed}: generation failed, skipping all methods: {err}");
                failures += config.methods.len();
                continue;
            }
        };
        fs::create_dir_all(&seed_dir)?;
        write_model(seed_dir.join("model.json"), &scenario.model)?;

        for (m, &method) in config.methods.iter().enumerate() {
            let run_dir = seed_dir.join(method.name());
            match run_one(&scenario, method, &config.search, &opts, &run_dir) {
                Ok(report) => per_method[m].push(RunMetrics {
                    h: report.h_score,
                    f1: report.f1,
                    d_hat: report.num_detected as f64,
                }),
                Err(err) => {
                    eprintln!("warning: seed {seed}, method {}: {err}", method.name());
                    failures += 1;
                }
            }
        }
    }

    write_results_csv(&config, &per_method)?;
    for (method, runs) in config.methods.iter().zip(&per_method) {
        let (h_mean, _) = mean_std(runs.iter().map(|r| r.h));
        let (f1_mean, _) = mean_std(runs.iter().map(|r| r.f1));
        println!(
            "{}: {} runs, mean h = {:.4}, mean F1 = {:.4}",
            method.name(),
            runs.len(),
            h_mean,
            f1_mean
        );
    }
    println!(
        "{} of {} runs failed -> {}",
        failures,
        config.seeds.len() * config.methods.len(),
        config.output_dir.join("results.csv").display()
    );
    Ok(())
}

/// Select, fit, and evaluate one (seed, method) unit, writing its artifacts.
fn run_one(
    scenario: &GeneratedScenario,
    method: Method,
    search_spec: &SearchSpec,
    opts: &SolverOptions,
    run_dir: &Path,
) -> Result<EvaluationReport> {
    let spec = method.constrained_spec(search_spec);
    let estimator = EstimatorOptions::default();
    let outcome = search(
        &scenario.train,
        scenario.holdout.as_ref(),
        &spec,
        method.fused(),
        opts,
        &estimator,
    )?;

    let penalty = method.penalty(outcome.lambda1, outcome.lambda2);
    let (estimate, _solutions) = fit_model(&scenario.train, &penalty, opts, &estimator)?;
    let report = evaluate_against_truth(scenario, &estimate)?;

    fs::create_dir_all(run_dir)?;
    write_trace_csv(run_dir.join("trace.csv"), &outcome.trace)?;
    fs::write(
        run_dir.join("best.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "method": method.name(),
            "lambda1": outcome.lambda1,
            "lambda2": outcome.lambda2,
        }))
        .map_err(Error::from)?,
    )?;
    write_estimate(run_dir.join("estimate.json"), &estimate)?;
    write_report(run_dir.join("report.json"), &report)?;
    Ok(report)
}

fn evaluate_against_truth(
    scenario: &GeneratedScenario,
    estimate: &tvising::EstimatedModel,
) -> Result<EvaluationReport> {
    tvising::evaluate(
        estimate,
        scenario.model.change_points(),
        &scenario.true_edges,
    )
}

/// Mean and sample standard deviation (0 for fewer than two values).
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

fn write_results_csv(
    config: &ExperimentConfig,
    per_method: &[Vec<RunMetrics>],
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "method",
        "criterion",
        "h_mean",
        "h_std",
        "f1_mean",
        "f1_std",
        "d_hat_mean",
        "d_hat_std",
    ])?;
    let criterion = match config.search.criterion {
        tvising::Criterion::Aic => "aic",
        tvising::Criterion::Auc => "auc",
    };
    for (method, runs) in config.methods.iter().zip(per_method) {
        if runs.is_empty() {
            eprintln!(
                "warning: method {} has no successful runs; omitting its row",
                method.name()
            );
            continue;
        }
        let (h_mean, h_std) = mean_std(runs.iter().map(|r| r.h));
        let (f1_mean, f1_std) = mean_std(runs.iter().map(|r| r.f1));
        let (d_mean, d_std) = mean_std(runs.iter().map(|r| r.d_hat));
        writer.write_record([
            method.name().to_string(),
            criterion.to_string(),
            h_mean.to_string(),
            h_std.to_string(),
            f1_mean.to_string(),
            f1_std.to_string(),
            d_mean.to_string(),
            d_std.to_string(),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    fs::write(config.output_dir.join("results.csv"), bytes)?;
    Ok(())
}
