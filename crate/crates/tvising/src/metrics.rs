//! Evaluation metrics: change-point distances and temporal edge scores.
//!
//! `hausdorff` is the symmetric worst-case distance between change-point
//! sets, normalized by the horizon; `one_sided_distance` measures only how
//! far the estimate strays from a reference set; `temporal_f1` scores the
//! per-timestamp edge sets of an estimated model against the truth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatedModel;

/// Report of one model evaluation against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Normalized Hausdorff distance between change-point sets, in `[0,1]`.
    pub h_score: f64,
    /// Time-averaged edge precision, in `[0,1]`.
    pub precision: f64,
    /// Time-averaged edge recall, in `[0,1]`.
    pub recall: f64,
    /// Harmonic mean of `precision` and `recall` (0 when both vanish).
    pub f1: f64,
    /// Number of detected change points.
    pub num_detected: usize,
}

fn min_distance(t: usize, set: &BTreeSet<usize>) -> usize {
    // Nearest neighbor in an ordered set via the two adjacent candidates.
    let up = set.range(t..).next().map(|&u| u - t);
    let down = set.range(..=t).next_back().map(|&d| t - d);
    match (up, down) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("set checked nonempty"),
    }
}

/// Normalized Hausdorff distance between two change-point sets over an
/// `n`-timestamp horizon:
/// `(1/n)·max(max_{t∈D} min_{t̂∈D̂}|t−t̂|, max_{t̂∈D̂} min_{t∈D}|t−t̂|)`.
/// Conventions: both sets empty → 0; exactly one empty → 1.
pub fn hausdorff(true_cp: &BTreeSet<usize>, est_cp: &BTreeSet<usize>, n: usize) -> f64 {
    match (true_cp.is_empty(), est_cp.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => {
            let forward = true_cp.iter().map(|&t| min_distance(t, est_cp)).max().unwrap();
            let backward = est_cp.iter().map(|&t| min_distance(t, true_cp)).max().unwrap();
            forward.max(backward) as f64 / n as f64
        }
    }
}

/// One-sided distance `d(A‖B) = max_{b∈B} min_{a∈A} |b−a|` (unnormalized):
/// how far the points of `B` stray from the reference set `A`. An empty `B`
/// costs 0; a nonempty `B` with an empty reference is undefined.
pub fn one_sided_distance(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> Result<f64> {
    if b.is_empty() {
        return Ok(0.0);
    }
    if a.is_empty() {
        return Err(Error::EmptyReferenceSet);
    }
    Ok(b.iter().map(|&t| min_distance(t, a)).max().unwrap() as f64)
}

/// How precision/recall are combined into F1 over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F1Mode {
    /// Average precision and recall over timestamps, then take one harmonic
    /// mean (the default reading of the scoring formulas).
    #[default]
    OfAverages,
    /// Take the harmonic mean per timestamp, then average the F1 values
    /// (sensitivity-check alternative).
    PerTimestampMean,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Temporal precision/recall/F1 of an estimated model against per-timestamp
/// true edge sets (0-based pairs, `a < b`; index `i` = timestamp `i+1`).
/// Per timestamp, `precision_i = |Ê_i ∩ E_i|/|Ê_i|` and
/// `recall_i = |Ê_i ∩ E_i|/|E_i|`; an empty denominator scores 1 when the
/// other set is also empty and 0 otherwise. Scores are averaged over
/// timestamps and combined per `mode`.
pub fn temporal_f1_with_mode(
    true_edges: &[BTreeSet<(usize, usize)>],
    est: &EstimatedModel,
    mode: F1Mode,
) -> Result<(f64, f64, f64)> {
    if true_edges.len() != est.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} timestamps of true edges for an n = {} model",
            true_edges.len(),
            est.n()
        )));
    }
    let n = est.n();
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for (i, truth) in true_edges.iter().enumerate() {
        let estimated = est.edges_at(i + 1)?;
        let hits = estimated.intersection(truth).count() as f64;
        let p_i = match (estimated.is_empty(), truth.is_empty()) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            _ => hits / estimated.len() as f64,
        };
        let r_i = match (truth.is_empty(), estimated.is_empty()) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            _ => hits / truth.len() as f64,
        };
        p_sum += p_i;
        r_sum += r_i;
        f_sum += harmonic(p_i, r_i);
    }
    let precision = p_sum / n as f64;
    let recall = r_sum / n as f64;
    let f1 = match mode {
        F1Mode::OfAverages => harmonic(precision, recall),
        F1Mode::PerTimestampMean => f_sum / n as f64,
    };
    Ok((precision, recall, f1))
}

/// [`temporal_f1_with_mode`] under the default combination.
pub fn temporal_f1(
    true_edges: &[BTreeSet<(usize, usize)>],
    est: &EstimatedModel,
) -> Result<(f64, f64, f64)> {
    temporal_f1_with_mode(true_edges, est, F1Mode::OfAverages)
}

/// Score an estimated model against the true change points and per-timestamp
/// edge sets.
pub fn evaluate(
    est: &EstimatedModel,
    true_change_points: &[usize],
    true_edges: &[BTreeSet<(usize, usize)>],
) -> Result<EvaluationReport> {
    let truth: BTreeSet<usize> = true_change_points.iter().copied().collect();
    let detected: BTreeSet<usize> = est.change_points().iter().copied().collect();
    let (precision, recall, f1) = temporal_f1(true_edges, est)?;
    Ok(EvaluationReport {
        h_score: hausdorff(&truth, &detected, est.n()),
        precision,
        recall,
        f1,
        num_detected: est.change_points().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::SegmentGraph;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    fn model_with(
        n: usize,
        p: usize,
        cps: &[usize],
        segment_edges: &[&[(usize, usize)]],
    ) -> EstimatedModel {
        let segments = segment_edges
            .iter()
            .map(|edges| {
                let mut theta = Array2::zeros((p, p));
                for &(a, b) in *edges {
                    theta[[a, b]] = 1.0;
                    theta[[b, a] ] = 1.0;
                }
                SegmentGraph::from_theta(theta, 0.5).unwrap()
            })
            .collect();
        EstimatedModel::new(n, p, cps.to_vec(), segments).unwrap()
    }

    #[test]
    fn hausdorff_perfect_match_is_zero() {
        assert_eq!(hausdorff(&set(&[51, 81]), &set(&[51, 81]), 100), 0.0);
    }

    #[test]
    fn hausdorff_single_offset_pair() {
        assert_abs_diff_eq!(hausdorff(&set(&[50]), &set(&[55]), 100), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn hausdorff_empty_conventions() {
        assert_eq!(hausdorff(&set(&[]), &set(&[]), 50), 0.0);
        assert_eq!(hausdorff(&set(&[10]), &set(&[]), 50), 1.0);
        assert_eq!(hausdorff(&set(&[]), &set(&[10]), 50), 1.0);
    }

    #[test]
    fn hausdorff_uses_worst_direction() {
        // D = {20,80}, D̂ = {20}: forward max = 60, backward = 0.
        assert_abs_diff_eq!(
            hausdorff(&set(&[20, 80]), &set(&[20]), 100),
            0.6,
            epsilon = 1e-15
        );
    }

    #[test]
    fn one_sided_conventions_and_example() {
        assert_eq!(one_sided_distance(&set(&[10]), &set(&[])).unwrap(), 0.0);
        assert_eq!(one_sided_distance(&set(&[10]), &set(&[10, 14])).unwrap(), 4.0);
        assert_eq!(one_sided_distance(&set(&[5, 9]), &set(&[5, 7, 9])).unwrap(), 2.0);
        assert!(matches!(
            one_sided_distance(&set(&[]), &set(&[3])),
            Err(Error::EmptyReferenceSet)
        ));
    }

    #[test]
    fn perfect_edges_score_one() {
        let truth: Vec<BTreeSet<(usize, usize)>> = vec![
            [(0usize, 1usize)].into_iter().collect(),
            [(0, 1)].into_iter().collect(),
            [(1, 2)].into_iter().collect(),
        ];
        let model = model_with(3, 3, &[3], &[&[(0, 1)], &[(1, 2)]]);
        let (p, r, f1) = temporal_f1(&truth, &model).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_estimate_has_zero_recall_and_f1() {
        let truth: Vec<BTreeSet<(usize, usize)>> =
            vec![[(0usize, 1usize)].into_iter().collect(); 4];
        let model = model_with(4, 3, &[], &[&[]]);
        let (p, r, f1) = temporal_f1(&truth, &model).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(r, 0.0);
        assert_eq!(f1, 0.0);
    }

    #[test]
    fn doubly_empty_timestamps_are_perfect() {
        let truth: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); 2];
        let model = model_with(2, 3, &[], &[&[]]);
        let (p, r, f1) = temporal_f1(&truth, &model).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn partial_overlap_scores_between() {
        // Timestamps 1-2: truth {01,12}, estimate {01} → p=1, r=0.5.
        let truth: Vec<BTreeSet<(usize, usize)>> =
            vec![[(0usize, 1usize), (1, 2)].into_iter().collect(); 2];
        let model = model_with(2, 3, &[], &[&[(0, 1)]]);
        let (p, r, f1) = temporal_f1(&truth, &model).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn f1_modes_differ_on_heterogeneous_timestamps() {
        // Timestamp 1 perfect, timestamp 2 entirely wrong: averaged P=R=0.5
        // → F1(of averages)=0.5; per-timestamp F1s are 1 and 0 → mean 0.5 as
        // well, so use asymmetric scores: t1 (p=1, r=0.5), t2 (p=0, r=0).
        let truth: Vec<BTreeSet<(usize, usize)>> = vec![
            [(0usize, 1usize), (1, 2)].into_iter().collect(),
            [(0, 2)].into_iter().collect(),
        ];
        let model = model_with(2, 3, &[2], &[&[(0, 1)], &[(1, 2)]]);
        let (p, r, f_avg) = temporal_f1_with_mode(&truth, &model, F1Mode::OfAverages).unwrap();
        let (_, _, f_per) = temporal_f1_with_mode(&truth, &model, F1Mode::PerTimestampMean).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(f_avg, harmonic(0.5, 0.25), epsilon = 1e-12);
        // Per timestamp: harmonic(1, 0.5)=2/3 and harmonic(0,0)=0 → mean 1/3.
        assert_abs_diff_eq!(f_per, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn temporal_f1_rejects_horizon_mismatch() {
        let truth: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); 3];
        let model = model_with(2, 3, &[], &[&[]]);
        assert!(temporal_f1(&truth, &model).is_err());
    }

    #[test]
    fn evaluate_combines_both_metric_families() {
        let truth_edges: Vec<BTreeSet<(usize, usize)>> = vec![
            [(0usize, 1usize)].into_iter().collect(),
            [(0, 1)].into_iter().collect(),
            [(1, 2)].into_iter().collect(),
            [(1, 2)].into_iter().collect(),
        ];
        let model = model_with(4, 3, &[3], &[&[(0, 1)], &[(1, 2)]]);
        let report = evaluate(&model, &[3], &truth_edges).unwrap();
        assert_eq!(report.h_score, 0.0);
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.num_detected, 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hausdorff_is_symmetric_and_zero_on_self(
            a in proptest::collection::btree_set(2usize..60, 0..6),
            b in proptest::collection::btree_set(2usize..60, 0..6),
        ) {
            let n = 60;
            prop_assert_eq!(hausdorff(&a, &b, n).to_bits(), hausdorff(&b, &a, n).to_bits());
            prop_assert_eq!(hausdorff(&a, &a, n), 0.0);
            prop_assert!(hausdorff(&a, &b, n) <= 1.0);
        }

        #[test]
        fn one_sided_bounded_by_scaled_hausdorff(
            a in proptest::collection::btree_set(2usize..60, 1..6),
            b in proptest::collection::btree_set(2usize..60, 1..6),
        ) {
            let n = 60;
            let one = one_sided_distance(&a, &b).unwrap();
            prop_assert!(one <= n as f64 * hausdorff(&a, &b, n) + 1e-12);
        }
    }
}
