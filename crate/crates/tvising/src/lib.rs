//! Structure learning for time-varying Ising models.
//!
//! Learns the piece-wise constant dependency graph of a binary time series:
//! each node is regressed on the others through a penalized conditional
//! likelihood whose group-fused ℓ2 term detects change points and whose ℓ1
//! term sparsifies each neighborhood. The crate covers the whole pipeline:
//!
//! - [`ising`]: exact model mathematics and small-`p` enumeration oracles;
//! - [`dataset`]: validated ±1 observation stacks;
//! - [`sampler`]: seeded synthetic benchmarks (regular graphs + Gibbs);
//! - [`solver`]: the node-wise proximal solver with both fused penalties and
//!   a directional-derivative stationarity certificate;
//! - [`estimator`]: change-point extraction and graph assembly;
//! - [`selection`]: AIC / held-out-AUC hyperparameter search;
//! - [`metrics`]: Hausdorff, one-sided distance, temporal precision/recall;
//! - [`io`]: the on-disk JSON/CSV formats shared with the CLI.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod io;
pub mod ising;
pub mod metrics;
pub mod sampler;
pub mod selection;
pub mod solver;

pub use dataset::SpinDataset;
pub use error::{Error, ErrorCategory, Result};
pub use estimator::{
    assemble_graphs, extract_change_points, fit_model, segment_parameters, ChangePointReport,
    EstimatedModel, EstimatorOptions, SegmentGraph, TAU_CP, TAU_SPARSE,
};
pub use ising::{
    conditional_probability, ModelDiagnostics, PiecewiseIsingModel, SpinVector, WeightMatrix,
};
pub use metrics::{
    evaluate, hausdorff, one_sided_distance, temporal_f1, temporal_f1_with_mode, EvaluationReport,
    F1Mode,
};
pub use sampler::{generate_scenario, GeneratedScenario, ScenarioConfig};
pub use selection::{
    aic, aic_with, auc_score, dim_count, dim_count_with, roc_auc, search, Criterion, DimBaseline,
    SearchOutcome, SearchSpec, SearchStrategy, TracePoint,
};
pub use solver::{
    check_stationarity, fit_node, node_loss_and_gradient, prox_combined, prox_fused_1d,
    prox_group_fused, prox_l1, soft_threshold, FusedNorm, NodeSolution, PenaltyConfig,
    SolverOptions, StepRule,
};
