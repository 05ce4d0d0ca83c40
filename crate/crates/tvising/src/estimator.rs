//! From per-node solution paths to an estimated piece-wise constant graph.
//!
//! Change points are the timestamps where some node's parameter path jumps
//! (`‖β̂^(i)−β̂^(i−1)‖₂ > tau_cp`); the union over nodes segments the horizon.
//! Within each segment the path is averaged per node, and an edge `{a,b}` is
//! kept when the larger of the two directed estimates exceeds `tau_sparse`
//! in magnitude (the max rule). Because the solver emits bit-identical tied
//! columns, `tau_cp` only guards against float dust and the detected set is
//! insensitive to its exact value over many orders of magnitude.

use std::collections::BTreeSet;

use ndarray::Array2;
use rayon::prelude::*;

use crate::dataset::SpinDataset;
use crate::error::{Error, Result};
use crate::solver::{fit_node, NodeSolution, PenaltyConfig, SolverOptions};

/// Default threshold on `‖β̂^(i)−β̂^(i−1)‖₂` for declaring a change point.
pub const TAU_CP: f64 = 1e-8;
/// Default threshold on `max(|θ̂_ab|,|θ̂_ba|)` for keeping an edge.
pub const TAU_SPARSE: f64 = 1e-6;

/// Post-processing thresholds of the estimator.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    /// Change-point threshold on consecutive-column ℓ2 differences.
    pub tau_cp: f64,
    /// Edge threshold on segment-averaged coefficients (max rule).
    pub tau_sparse: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { tau_cp: TAU_CP, tau_sparse: TAU_SPARSE }
    }
}

/// Change points detected from a set of node solutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangePointReport {
    /// Sorted union over nodes, 1-based timestamps in `{2..n}`.
    pub union: Vec<usize>,
    /// Per-node sorted detections (same convention), indexed like the input
    /// solutions.
    pub per_node: Vec<Vec<usize>>,
}

/// Detect the change points of each solution path and their union. A change
/// point `T` means the parameters of timestamps `T−1` and `T` differ.
pub fn extract_change_points(solutions: &[NodeSolution], tau_cp: f64) -> ChangePointReport {
    let mut union = BTreeSet::new();
    let mut per_node = Vec::with_capacity(solutions.len());
    for sol in solutions {
        let n = sol.beta.ncols();
        let mut mine = Vec::new();
        for i in 1..n {
            let mut norm2 = 0.0;
            for r in 0..sol.beta.nrows() {
                let d = sol.beta[[r, i]] - sol.beta[[r, i - 1]];
                norm2 += d * d;
            }
            if norm2.sqrt() > tau_cp {
                mine.push(i + 1);
                union.insert(i + 1);
            }
        }
        per_node.push(mine);
    }
    ChangePointReport { union: union.into_iter().collect(), per_node }
}

/// Half-open 0-based column ranges of the segments induced by 1-based
/// change points over an `n`-timestamp horizon.
fn segment_column_ranges(change_points: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut starts = Vec::with_capacity(change_points.len() + 2);
    starts.push(0);
    starts.extend(change_points.iter().map(|&t| t - 1));
    starts.push(n);
    starts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Average a solution path per segment: returns `(p−1) × num_segments`,
/// column `j` = the mean of `β̂` over segment `j`'s timestamps.
pub fn segment_parameters(solution: &NodeSolution, change_points: &[usize]) -> Array2<f64> {
    let n = solution.beta.ncols();
    let width = solution.beta.nrows();
    let ranges = segment_column_ranges(change_points, n);
    let mut out = Array2::zeros((width, ranges.len()));
    for (j, &(lo, hi)) in ranges.iter().enumerate() {
        let len = (hi - lo) as f64;
        for r in 0..width {
            let mut sum = 0.0;
            for c in lo..hi {
                sum += solution.beta[[r, c]];
            }
            out[[r, j]] = sum / len;
        }
    }
    out
}

/// One segment of the estimated model: the full matrix of directed
/// segment-averaged estimates (`theta[[a,b]]` = node `a`'s coefficient on
/// node `b`, zero diagonal) plus the edges selected by the max rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGraph {
    theta: Array2<f64>,
    edges: Vec<(usize, usize, f64, f64)>,
}

impl SegmentGraph {
    /// Build from directed estimates, selecting edges by
    /// `max(|θ_ab|,|θ_ba|) > tau_sparse`.
    pub fn from_theta(theta: Array2<f64>, tau_sparse: f64) -> Result<Self> {
        let p = theta.nrows();
        if theta.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "theta must be square, got {}×{}",
                theta.nrows(),
                theta.ncols()
            )));
        }
        let mut edges = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                let (wab, wba) = (theta[[a, b]], theta[[b, a]]);
                if wab.abs().max(wba.abs()) > tau_sparse {
                    edges.push((a, b, wab, wba));
                }
            }
        }
        Ok(SegmentGraph { theta, edges })
    }

    /// Reassemble from already-validated parts (deserialization path): the
    /// edge list is taken verbatim instead of being re-derived from `theta`,
    /// so round-trips preserve selections made under any threshold.
    pub(crate) fn from_parts(theta: Array2<f64>, edges: Vec<(usize, usize, f64, f64)>) -> Self {
        debug_assert_eq!(theta.nrows(), theta.ncols());
        debug_assert!(edges.iter().all(|&(a, b, _, _)| a < b && b < theta.nrows()));
        SegmentGraph { theta, edges }
    }

    /// Directed estimates, `p×p`.
    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    /// Selected edges as `(a, b, θ_ab, θ_ba)` with `a < b`, 0-based.
    pub fn edges(&self) -> &[(usize, usize, f64, f64)] {
        &self.edges
    }

    /// Selected edge set (0-based, `a < b`).
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|&(a, b, _, _)| (a, b)).collect()
    }
}

/// Assemble per-segment graphs from the solutions and the (already merged)
/// change-point union. Coordinate `r` of node `a`'s path maps to node
/// `b = r` when `r < a` and `b = r+1` otherwise (removed-coordinate order).
pub fn assemble_graphs(
    solutions: &[NodeSolution],
    change_points: &[usize],
    tau_sparse: f64,
) -> Result<Vec<SegmentGraph>> {
    let p = solutions.len();
    if p < 2 {
        return Err(Error::InvalidConfig("need at least two node solutions".into()));
    }
    let num_segments = change_points.len() + 1;
    let averaged: Vec<Array2<f64>> = solutions
        .iter()
        .map(|sol| segment_parameters(sol, change_points))
        .collect();
    let mut graphs = Vec::with_capacity(num_segments);
    for j in 0..num_segments {
        let mut theta = Array2::zeros((p, p));
        for (a, params) in averaged.iter().enumerate() {
            if params.nrows() != p - 1 {
                return Err(Error::DimensionMismatch(format!(
                    "solution for node {a} has width {}, expected {}",
                    params.nrows(),
                    p - 1
                )));
            }
            for r in 0..p - 1 {
                let b = if r < a { r } else { r + 1 };
                theta[[a, b]] = params[[r, j]];
            }
        }
        graphs.push(SegmentGraph::from_theta(theta, tau_sparse)?);
    }
    Ok(graphs)
}

/// Estimated piece-wise constant graph over an `n`-timestamp horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedModel {
    n: usize,
    p: usize,
    change_points: Vec<usize>,
    segments: Vec<SegmentGraph>,
}

impl EstimatedModel {
    /// Assemble from parts, validating the change points against the horizon.
    pub fn new(
        n: usize,
        p: usize,
        change_points: Vec<usize>,
        segments: Vec<SegmentGraph>,
    ) -> Result<Self> {
        if segments.len() != change_points.len() + 1 {
            return Err(Error::InvalidChangePoints(format!(
                "{} segments for {} change points",
                segments.len(),
                change_points.len()
            )));
        }
        let mut prev = 1usize;
        for &t in &change_points {
            if t < 2 || t > n || t <= prev {
                return Err(Error::InvalidChangePoints(format!(
                    "change point {t} outside {{2..{n}}} or not strictly increasing"
                )));
            }
            prev = t;
        }
        for seg in &segments {
            if seg.theta.nrows() != p {
                return Err(Error::DimensionMismatch(format!(
                    "segment graph is {}×{}, expected p = {p}",
                    seg.theta.nrows(),
                    seg.theta.ncols()
                )));
            }
        }
        Ok(EstimatedModel { n, p, change_points, segments })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Detected change points, 1-based timestamps in `{2..n}`.
    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn segments(&self) -> &[SegmentGraph] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Index of the segment containing 1-based timestamp `t`.
    pub fn segment_index(&self, t: usize) -> Result<usize> {
        if t < 1 || t > self.n {
            return Err(Error::TimestampOutOfRange { t, n: self.n });
        }
        Ok(self.change_points.partition_point(|&cp| cp <= t))
    }

    /// Graph of the segment containing 1-based timestamp `t`.
    pub fn graph_at(&self, t: usize) -> Result<&SegmentGraph> {
        Ok(&self.segments[self.segment_index(t)?])
    }

    /// Edge set active at 1-based timestamp `t` (0-based pairs, `a < b`).
    pub fn edges_at(&self, t: usize) -> Result<BTreeSet<(usize, usize)>> {
        Ok(self.graph_at(t)?.edge_set())
    }
}

/// Fit every node's path (in parallel), merge the detected change points,
/// and assemble the per-segment graphs. Returns the estimated model together
/// with the raw per-node solutions for diagnostics and serialization.
pub fn fit_model(
    dataset: &SpinDataset,
    penalty: &PenaltyConfig,
    solver: &SolverOptions,
    estimator: &EstimatorOptions,
) -> Result<(EstimatedModel, Vec<NodeSolution>)> {
    let p = dataset.p();
    let solutions = (0..p)
        .into_par_iter()
        .map(|node| fit_node(dataset, node, penalty, solver))
        .collect::<Result<Vec<_>>>()?;
    let report = extract_change_points(&solutions, estimator.tau_cp);
    let segments = assemble_graphs(&solutions, &report.union, estimator.tau_sparse)?;
    let model = EstimatedModel::new(dataset.n(), p, report.union, segments)?;
    Ok((model, solutions))
}
