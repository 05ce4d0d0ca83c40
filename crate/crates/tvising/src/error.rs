//! Crate-wide error type.
//!
//! Errors carry a coarse [`ErrorCategory`] so callers (notably the CLI) can
//! map failures to exit codes without matching on every variant.

use thiserror::Error;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Invalid inputs, shapes, or configuration.
    Validation,
    /// Numerical failure inside an optimization routine.
    Solver,
    /// File or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("invalid spin value {value:?} at row {row}, column {column} (expected -1 or +1)")]
    InvalidSpin {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("invalid change points: {0}")]
    InvalidChangePoints(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node count {p} exceeds the enumeration limit {max} (2^p states)")]
    EnumerationTooLarge { p: usize, max: usize },

    #[error("node index {node} out of range for p = {p}")]
    NodeOutOfRange { node: usize, p: usize },

    #[error("timestamp {t} out of range 1..={n}")]
    TimestampOutOfRange { t: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("AUC is undefined: holdout labels are all {0}")]
    UndefinedAuc(String),

    #[error("one-sided distance d(A||B) undefined: A empty while B is not")]
    EmptyReferenceSet,

    #[error("solver failed on node {node}: {reason}")]
    SolverFailure { node: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Exit-code class of this error (validation 1, solver 2, I/O 3).
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::SolverFailure { .. } => ErrorCategory::Solver,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorCategory::Io,
            _ => ErrorCategory::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
