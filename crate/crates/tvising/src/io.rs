//! On-disk formats: JSON for models, datasets, solutions, and reports; CSV
//! for datasets, search traces, and per-segment edge tables.
//!
//! Every artifact has a string codec (`*_to_json` / `*_from_json`, or
//! `*_to_csv` / `*_from_csv`) plus thin path wrappers (`write_*` / `read_*`).
//! Serialized indices are 1-based — nodes `1..=p`, timestamps `1..=n`,
//! replicates `1..=n^(i)` — and the conversion to the crate's internal
//! 0-based node indexing happens here and nowhere else. Floating-point
//! values round-trip exactly (shortest-representation encoding both ways).

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::SpinDataset;
use crate::error::{Error, Result};
use crate::estimator::{EstimatedModel, SegmentGraph};
use crate::ising::{PiecewiseIsingModel, WeightMatrix};
use crate::metrics::EvaluationReport;
use crate::selection::TracePoint;
use crate::solver::NodeSolution;

// ---------------------------------------------------------------------------
// Serialized shapes
// ---------------------------------------------------------------------------

/// `WeightMatrix` as `{p, edges: [[a, b, w], ...]}` with `1 ≤ a < b ≤ p`.
#[derive(Serialize, Deserialize)]
struct WeightsRepr {
    p: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// `PiecewiseIsingModel` as horizon, 1-based change points, and one weight
/// matrix per segment.
#[derive(Serialize, Deserialize)]
struct ModelRepr {
    n: usize,
    change_points: Vec<usize>,
    segments: Vec<WeightsRepr>,
}

/// `SpinDataset` as nested arrays: `blocks[i]` holds timestamp `i+1`'s
/// observation rows.
#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    p: usize,
    n: usize,
    blocks: Vec<Vec<Vec<i8>>>,
}

/// One estimated segment: selected edges as `[a, b, θ_ab, θ_ba]`, 1-based.
#[derive(Serialize, Deserialize)]
struct SegmentRepr {
    edges: Vec<(usize, usize, f64, f64)>,
}

/// `EstimatedModel` as horizon, node count, 1-based change points, and the
/// per-segment edge lists.
#[derive(Serialize, Deserialize)]
struct EstimateRepr {
    n: usize,
    p: usize,
    change_points: Vec<usize>,
    segments: Vec<SegmentRepr>,
}

/// `NodeSolution` with its full coefficient path; `beta` is row-major
/// `(p−1)×n`. The in-memory objective trace is an optimization diagnostic
/// and is not persisted.
#[derive(Serialize, Deserialize)]
struct SolutionRepr {
    node: usize,
    objective: f64,
    iterations: usize,
    stationarity_violation: f64,
    prox_converged: bool,
    beta: Vec<Vec<f64>>,
}

/// Per-node diagnostics row (everything except the coefficient path).
#[derive(Serialize)]
struct DiagnosticsRepr {
    node: usize,
    objective: f64,
    iterations: usize,
    stationarity_violation: f64,
    prox_converged: bool,
}

// ---------------------------------------------------------------------------
// Ground-truth model JSON
// ---------------------------------------------------------------------------

fn weights_to_repr(w: &WeightMatrix) -> WeightsRepr {
    WeightsRepr {
        p: w.p(),
        edges: w.edges().into_iter().map(|(a, b, v)| (a + 1, b + 1, v)).collect(),
    }
}

fn weights_from_repr(repr: &WeightsRepr) -> Result<WeightMatrix> {
    let mut edges = Vec::with_capacity(repr.edges.len());
    for &(a, b, v) in &repr.edges {
        if a < 1 || b <= a || b > repr.p {
            return Err(Error::InvalidWeights(format!(
                "edge ({a}, {b}) violates 1 ≤ a < b ≤ p = {}",
                repr.p
            )));
        }
        edges.push((a - 1, b - 1, v));
    }
    WeightMatrix::from_edges(repr.p, &edges)
}

/// Serialize a ground-truth model to pretty JSON.
pub fn model_to_json(model: &PiecewiseIsingModel) -> Result<String> {
    let repr = ModelRepr {
        n: model.n(),
        change_points: model.change_points().to_vec(),
        segments: model.segments().iter().map(weights_to_repr).collect(),
    };
    Ok(serde_json::to_string_pretty(&repr)?)
}

/// Parse a ground-truth model from JSON, validating all invariants.
pub fn model_from_json(text: &str) -> Result<PiecewiseIsingModel> {
    let repr: ModelRepr = serde_json::from_str(text)?;
    let segments = repr
        .segments
        .iter()
        .map(weights_from_repr)
        .collect::<Result<Vec<_>>>()?;
    PiecewiseIsingModel::new(repr.n, repr.change_points, segments)
}

/// Write a ground-truth model to a JSON file.
pub fn write_model(path: impl AsRef<Path>, model: &PiecewiseIsingModel) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

/// Read a ground-truth model from a JSON file.
pub fn read_model(path: impl AsRef<Path>) -> Result<PiecewiseIsingModel> {
    model_from_json(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Dataset JSON + CSV
// ---------------------------------------------------------------------------

/// Serialize a dataset to compact JSON.
pub fn dataset_to_json(dataset: &SpinDataset) -> Result<String> {
    let repr = DatasetRepr {
        p: dataset.p(),
        n: dataset.n(),
        blocks: dataset
            .blocks()
            .iter()
            .map(|block| block.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
    };
    Ok(serde_json::to_string(&repr)?)
}

/// Parse a dataset from JSON, validating shapes and the ±1 contract.
pub fn dataset_from_json(text: &str) -> Result<SpinDataset> {
    let repr: DatasetRepr = serde_json::from_str(text)?;
    if repr.blocks.len() != repr.n {
        return Err(Error::InvalidConfig(format!(
            "dataset claims n = {} but has {} blocks",
            repr.n,
            repr.blocks.len()
        )));
    }
    let blocks = repr
        .blocks
        .iter()
        .enumerate()
        .map(|(i, rows)| rows_to_block(rows, repr.p, i + 1))
        .collect::<Result<Vec<_>>>()?;
    SpinDataset::new(repr.p, blocks)
}

fn rows_to_block(rows: &[Vec<i8>], p: usize, timestamp: usize) -> Result<Array2<i8>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "timestamp {timestamp} has no observations"
        )));
    }
    let mut flat = Vec::with_capacity(rows.len() * p);
    for row in rows {
        if row.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "timestamp {timestamp} has a row of length {}, expected p = {p}",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((rows.len(), p), flat)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

/// Write a dataset to a JSON file.
pub fn write_dataset_json(path: impl AsRef<Path>, dataset: &SpinDataset) -> Result<()> {
    fs::write(path, dataset_to_json(dataset)?)?;
    Ok(())
}

/// Read a dataset from a JSON file.
pub fn read_dataset_json(path: impl AsRef<Path>) -> Result<SpinDataset> {
    dataset_from_json(&fs::read_to_string(path)?)
}

/// Serialize a dataset to CSV with header `timestamp,replicate,v1,...,vp`
/// and one observation vector per row.
pub fn dataset_to_csv(dataset: &SpinDataset) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["timestamp".to_string(), "replicate".to_string()];
    header.extend((1..=dataset.p()).map(|b| format!("v{b}")));
    writer.write_record(&header)?;
    for (i, block) in dataset.blocks().iter().enumerate() {
        for (l, row) in block.rows().into_iter().enumerate() {
            let mut record = vec![(i + 1).to_string(), (l + 1).to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Parse a dataset from CSV. Rows must be grouped by timestamp in order
/// (`1, 1, ..., 2, ...`) with replicates numbered `1..` within each
/// timestamp; every value must be exactly `-1` or `+1`.
pub fn dataset_from_csv(text: &str) -> Result<SpinDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 4 || &headers[0] != "timestamp" || &headers[1] != "replicate" {
        return Err(Error::InvalidConfig(
            "CSV header must be timestamp,replicate,v1,...,vp with p ≥ 2".into(),
        ));
    }
    let p = headers.len() - 2;

    let mut blocks: Vec<Array2<i8>> = Vec::new();
    let mut current: Vec<i8> = Vec::new();
    let mut current_rows = 0usize;
    let flush = |buf: &mut Vec<i8>, rows: &mut usize, blocks: &mut Vec<Array2<i8>>| -> Result<()> {
        let block = Array2::from_shape_vec((*rows, p), std::mem::take(buf))
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        *rows = 0;
        blocks.push(block);
        Ok(())
    };

    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = idx + 1;
        if record.len() != p + 2 {
            return Err(Error::DimensionMismatch(format!(
                "row {row_no} has {} fields, expected {}",
                record.len(),
                p + 2
            )));
        }
        let t: usize = record[0]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("row {row_no}: bad timestamp {:?}", &record[0])))?;
        let l: usize = record[1]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("row {row_no}: bad replicate {:?}", &record[1])))?;

        if t == blocks.len() + 2 && current_rows > 0 {
            flush(&mut current, &mut current_rows, &mut blocks)?;
        }
        let expected_t = blocks.len() + 1;
        if t != expected_t {
            return Err(Error::InvalidConfig(format!(
                "row {row_no}: timestamp {t} out of order (expected {expected_t} or {})",
                expected_t + 1
            )));
        }
        if l != current_rows + 1 {
            return Err(Error::InvalidConfig(format!(
                "row {row_no}: replicate {l} out of order (expected {})",
                current_rows + 1
            )));
        }
        for (c, field) in record.iter().skip(2).enumerate() {
            match field.trim().parse::<i64>() {
                Ok(1) => current.push(1),
                Ok(-1) => current.push(-1),
                _ => {
                    return Err(Error::InvalidSpin {
                        row: row_no,
                        column: c + 1,
                        value: field.to_string(),
                    })
                }
            }
        }
        current_rows += 1;
    }
    if current_rows > 0 {
        flush(&mut current, &mut current_rows, &mut blocks)?;
    }
    SpinDataset::new(p, blocks)
}

/// Write a dataset to a CSV file.
pub fn write_dataset_csv(path: impl AsRef<Path>, dataset: &SpinDataset) -> Result<()> {
    fs::write(path, dataset_to_csv(dataset)?)?;
    Ok(())
}

/// Read a dataset from a CSV file.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<SpinDataset> {
    dataset_from_csv(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Estimated model JSON
// ---------------------------------------------------------------------------

/// Serialize an estimated model to pretty JSON.
pub fn estimate_to_json(model: &EstimatedModel) -> Result<String> {
    let repr = EstimateRepr {
        n: model.n(),
        p: model.p(),
        change_points: model.change_points().to_vec(),
        segments: model
            .segments()
            .iter()
            .map(|seg| SegmentRepr {
                edges: seg
                    .edges()
                    .iter()
                    .map(|&(a, b, wab, wba)| (a + 1, b + 1, wab, wba))
                    .collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&repr)?)
}

/// Parse an estimated model from JSON. The per-segment edge lists are kept
/// verbatim (selection thresholds are not re-applied).
pub fn estimate_from_json(text: &str) -> Result<EstimatedModel> {
    let repr: EstimateRepr = serde_json::from_str(text)?;
    let mut segments = Vec::with_capacity(repr.segments.len());
    for seg in &repr.segments {
        let mut theta = Array2::zeros((repr.p, repr.p));
        let mut edges = Vec::with_capacity(seg.edges.len());
        for &(a, b, wab, wba) in &seg.edges {
            if a < 1 || b <= a || b > repr.p {
                return Err(Error::InvalidWeights(format!(
                    "edge ({a}, {b}) violates 1 ≤ a < b ≤ p = {}",
                    repr.p
                )));
            }
            theta[[a - 1, b - 1]] = wab;
            theta[[b - 1, a - 1]] = wba;
            edges.push((a - 1, b - 1, wab, wba));
        }
        edges.sort_by_key(|x| (x.0, x.1));
        segments.push(SegmentGraph::from_parts(theta, edges));
    }
    EstimatedModel::new(repr.n, repr.p, repr.change_points, segments)
}

/// Write an estimated model to a JSON file.
pub fn write_estimate(path: impl AsRef<Path>, model: &EstimatedModel) -> Result<()> {
    fs::write(path, estimate_to_json(model)?)?;
    Ok(())
}

/// Read an estimated model from a JSON file.
pub fn read_estimate(path: impl AsRef<Path>) -> Result<EstimatedModel> {
    estimate_from_json(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Node solutions and diagnostics JSON
// ---------------------------------------------------------------------------

/// Serialize per-node solutions (with full coefficient paths) to JSON.
pub fn solutions_to_json(solutions: &[NodeSolution]) -> Result<String> {
    let reprs: Vec<SolutionRepr> = solutions
        .iter()
        .map(|s| SolutionRepr {
            node: s.node + 1,
            objective: s.objective,
            iterations: s.iterations,
            stationarity_violation: s.stationarity_violation,
            prox_converged: s.prox_converged,
            beta: s.beta.rows().into_iter().map(|r| r.to_vec()).collect(),
        })
        .collect();
    Ok(serde_json::to_string(&reprs)?)
}

/// Parse per-node solutions from JSON. The transient objective trace is not
/// persisted, so it is restored empty.
pub fn solutions_from_json(text: &str) -> Result<Vec<NodeSolution>> {
    let reprs: Vec<SolutionRepr> = serde_json::from_str(text)?;
    reprs
        .into_iter()
        .map(|r| {
            if r.node < 1 {
                return Err(Error::InvalidConfig("node indices are 1-based".into()));
            }
            let rows = r.beta.len();
            if rows == 0 {
                return Err(Error::DimensionMismatch("beta has no rows".into()));
            }
            let cols = r.beta[0].len();
            let mut flat = Vec::with_capacity(rows * cols);
            for row in &r.beta {
                if row.len() != cols {
                    return Err(Error::DimensionMismatch("beta rows differ in length".into()));
                }
                flat.extend_from_slice(row);
            }
            let beta = Array2::from_shape_vec((rows, cols), flat)
                .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
            Ok(NodeSolution {
                node: r.node - 1,
                beta,
                objective: r.objective,
                iterations: r.iterations,
                stationarity_violation: r.stationarity_violation,
                objective_trace: Vec::new(),
                prox_converged: r.prox_converged,
            })
        })
        .collect()
}

/// Write per-node solutions to a JSON file.
pub fn write_solutions(path: impl AsRef<Path>, solutions: &[NodeSolution]) -> Result<()> {
    fs::write(path, solutions_to_json(solutions)?)?;
    Ok(())
}

/// Read per-node solutions from a JSON file.
pub fn read_solutions(path: impl AsRef<Path>) -> Result<Vec<NodeSolution>> {
    solutions_from_json(&fs::read_to_string(path)?)
}

/// Serialize the per-node diagnostics table (objective, iterations,
/// stationarity certificate) without the coefficient paths.
pub fn diagnostics_to_json(solutions: &[NodeSolution]) -> Result<String> {
    let reprs: Vec<DiagnosticsRepr> = solutions
        .iter()
        .map(|s| DiagnosticsRepr {
            node: s.node + 1,
            objective: s.objective,
            iterations: s.iterations,
            stationarity_violation: s.stationarity_violation,
            prox_converged: s.prox_converged,
        })
        .collect();
    Ok(serde_json::to_string_pretty(&reprs)?)
}

/// Write the per-node diagnostics table to a JSON file.
pub fn write_diagnostics(path: impl AsRef<Path>, solutions: &[NodeSolution]) -> Result<()> {
    fs::write(path, diagnostics_to_json(solutions)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation report JSON
// ---------------------------------------------------------------------------

/// Serialize an evaluation report to pretty JSON.
pub fn report_to_json(report: &EvaluationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Parse an evaluation report from JSON.
pub fn report_from_json(text: &str) -> Result<EvaluationReport> {
    Ok(serde_json::from_str(text)?)
}

/// Write an evaluation report to a JSON file.
pub fn write_report(path: impl AsRef<Path>, report: &EvaluationReport) -> Result<()> {
    fs::write(path, report_to_json(report)?)?;
    Ok(())
}

/// Read an evaluation report from a JSON file.
pub fn read_report(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    report_from_json(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Search trace CSV
// ---------------------------------------------------------------------------

/// Serialize a hyperparameter-search trace to CSV with columns
/// `lambda1,lambda2,criterion,num_change_points`.
pub fn trace_to_csv(trace: &[TracePoint]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["lambda1", "lambda2", "criterion", "num_change_points"])?;
    for point in trace {
        writer.write_record([
            point.lambda1.to_string(),
            point.lambda2.to_string(),
            point.criterion_value.to_string(),
            point.num_change_points.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Parse a hyperparameter-search trace from CSV.
pub fn trace_from_csv(text: &str) -> Result<Vec<TracePoint>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["lambda1", "lambda2", "criterion", "num_change_points"];
    if headers.iter().ne(expected) {
        return Err(Error::InvalidConfig(format!(
            "trace header must be {}",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| -> Result<f64> {
            record[c]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("trace row {}: bad number {:?}", idx + 1, &record[c])))
        };
        out.push(TracePoint {
            lambda1: field(0)?,
            lambda2: field(1)?,
            criterion_value: field(2)?,
            num_change_points: record[3].parse().map_err(|_| {
                Error::InvalidConfig(format!("trace row {}: bad count {:?}", idx + 1, &record[3]))
            })?,
        });
    }
    Ok(out)
}

/// Write a hyperparameter-search trace to a CSV file.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TracePoint]) -> Result<()> {
    fs::write(path, trace_to_csv(trace)?)?;
    Ok(())
}

/// Read a hyperparameter-search trace from a CSV file.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TracePoint>> {
    trace_from_csv(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Per-segment edge table CSV (plot emission)
// ---------------------------------------------------------------------------

/// Serialize the estimated model's edges as one CSV row per (segment, edge):
/// `segment,start,end,a,b,w_ab,w_ba` with inclusive 1-based timestamp spans.
pub fn segment_edges_to_csv(model: &EstimatedModel) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["segment", "start", "end", "a", "b", "w_ab", "w_ba"])?;
    let cps = model.change_points();
    for (s, seg) in model.segments().iter().enumerate() {
        let start = if s == 0 { 1 } else { cps[s - 1] };
        let end = if s == cps.len() { model.n() } else { cps[s] - 1 };
        for &(a, b, wab, wba) in seg.edges() {
            writer.write_record([
                (s + 1).to_string(),
                start.to_string(),
                end.to_string(),
                (a + 1).to_string(),
                (b + 1).to_string(),
                wab.to_string(),
                wba.to_string(),
            ])?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Write the per-segment edge table to a CSV file.
pub fn write_segment_edges_csv(path: impl AsRef<Path>, model: &EstimatedModel) -> Result<()> {
    fs::write(path, segment_edges_to_csv(model)?)?;
    Ok(())
}
