//! Plumbing shared by the subcommands: thread-pool setup, dataset file
//! dispatch by extension, TOML config loading, the method switch, and the
//! solver flag block.

use std::env;
use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use tvising::io::{read_dataset_csv, read_dataset_json, write_dataset_csv, write_dataset_json};
use tvising::solver::{FusedNorm, PenaltyConfig, SolverOptions, StepRule};
use tvising::{Error, Result, SearchSpec, SearchStrategy, SpinDataset};

/// Apply `TVISING_THREADS` (when set) as a global cap on the worker pool
/// used by the per-node fits.
pub fn configure_threads() -> Result<()> {
    match env::var("TVISING_THREADS") {
        Ok(value) => {
            let threads: usize = value.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "TVISING_THREADS must be a positive integer, got {value:?}"
                ))
            })?;
            if threads == 0 {
                return Err(Error::InvalidConfig(
                    "TVISING_THREADS must be a positive integer, got 0".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| Error::InvalidConfig(e.to_string()))
        }
        Err(env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(Error::InvalidConfig(format!("TVISING_THREADS: {e}"))),
    }
}

/// Read a dataset file, dispatching on its `.csv` / `.json` extension.
pub fn read_dataset(path: &Path) -> Result<SpinDataset> {
    match extension(path)? {
        "csv" => read_dataset_csv(path),
        _ => read_dataset_json(path),
    }
}

/// Write a dataset file, dispatching on its `.csv` / `.json` extension.
pub fn write_dataset(path: &Path, dataset: &SpinDataset) -> Result<()> {
    match extension(path)? {
        "csv" => write_dataset_csv(path, dataset),
        _ => write_dataset_json(path, dataset),
    }
}

fn extension(path: &Path) -> Result<&str> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok("csv"),
        Some("json") => Ok("json"),
        _ => Err(Error::InvalidConfig(format!(
            "{}: dataset files must end in .csv or .json",
            path.display()
        ))),
    }
}

/// Load a TOML config file into a deserializable type, attaching the path to
/// any parse error.
pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Estimation method: the group-fused primary estimator, the coordinate-wise
/// fused baseline, or the unfused per-timestamp baseline (`λ1 = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Group-fused ℓ2 differences: change points shared across coordinates.
    Tvifl,
    /// Coordinate-wise ℓ1 differences.
    Tesla,
    /// No fusion at all: an independent graph per timestamp.
    PerTimestamp,
}

impl Method {
    /// Fused-difference norm this method optimizes.
    pub fn fused(self) -> FusedNorm {
        match self {
            Method::Tesla => FusedNorm::L1,
            Method::Tvifl | Method::PerTimestamp => FusedNorm::GroupL2,
        }
    }

    /// The λ1 actually used: the per-timestamp baseline pins it to zero.
    pub fn effective_lambda1(self, lambda1: f64) -> f64 {
        match self {
            Method::PerTimestamp => 0.0,
            _ => lambda1,
        }
    }

    /// Penalty configuration at the requested weights.
    pub fn penalty(self, lambda1: f64, lambda2: f64) -> PenaltyConfig {
        PenaltyConfig {
            lambda1: self.effective_lambda1(lambda1),
            lambda2,
            fused: self.fused(),
        }
    }

    /// Directory / CSV label of the method.
    pub fn name(self) -> &'static str {
        match self {
            Method::Tvifl => "tvifl",
            Method::Tesla => "tesla",
            Method::PerTimestamp => "per-timestamp",
        }
    }

    /// Search spec with the method's constraints applied: the per-timestamp
    /// baseline collapses the λ1 axis to the single point 0.
    pub fn constrained_spec(self, spec: &SearchSpec) -> SearchSpec {
        let mut spec = spec.clone();
        if self == Method::PerTimestamp {
            spec.lambda1_range = (0.0, 0.0);
            if let SearchStrategy::Grid { lambda2_points, .. } = spec.strategy {
                spec.strategy = SearchStrategy::Grid { lambda1_points: 1, lambda2_points };
            }
        }
        spec
    }
}

/// Step-size policy flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    /// Constant step from the crude global curvature bound.
    Fixed,
    /// Backtracking around the tighter per-block bound (default).
    Backtracking,
}

/// Solver flags shared by `fit`, `select`, and `experiment`. Unset flags
/// fall back to the library defaults.
#[derive(Debug, Clone, Copy, Args)]
pub struct SolverArgs {
    /// Maximum outer iterations per node
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,

    /// Outer relative-decrease stopping tolerance
    #[arg(long = "tol")]
    pub tol: Option<f64>,

    /// Inner prox duality-gap tolerance cap
    #[arg(long = "inner-tol")]
    pub inner_tol: Option<f64>,

    /// Stationarity certificate gate, scaled by 1 + |objective|
    #[arg(long = "stationarity-tol")]
    pub stationarity_tol: Option<f64>,

    /// Step-size policy
    #[arg(long = "step", value_enum)]
    pub step: Option<StepArg>,
}

impl SolverArgs {
    /// Solver options with any set flags overriding the defaults.
    pub fn to_options(self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Some(v) = self.max_iter {
            opts.max_outer_iter = v;
        }
        if let Some(v) = self.tol {
            opts.tol_outer = v;
        }
        if let Some(v) = self.inner_tol {
            opts.tol_inner = v;
        }
        if let Some(v) = self.stationarity_tol {
            opts.tol_stationarity = v;
        }
        if let Some(step) = self.step {
            opts.step_rule = match step {
                StepArg::Fixed => StepRule::Fixed,
                StepArg::Backtracking => StepRule::Backtracking,
            };
        }
        opts
    }
}
