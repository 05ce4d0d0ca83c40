//! Hyperparameter selection: AIC and held-out AUC over `(λ1, λ2)`.
//!
//! AIC trades the summed conditional negative log-likelihood against the
//! number of estimated parameters (new nonzeros introduced at each detected
//! jump). AUC scores how well the fitted conditional probabilities rank a
//! held-out sample's spins. `search` evaluates candidate pairs by a full
//! [`fit_model`] and returns the winner (min AIC / max AUC), breaking ties
//! toward the stronger penalty.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SpinDataset;
use crate::error::{Error, Result};
use crate::estimator::{fit_model, EstimatedModel, EstimatorOptions, TAU_CP, TAU_SPARSE};
use crate::ising::conditional_probability;
use crate::sampler::derive_rng;
use crate::solver::{node_loss_and_gradient, FusedNorm, NodeSolution, PenaltyConfig, SolverOptions};

/// Reference column for the first timestamp in the dimension count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DimBaseline {
    /// `β̂^(0) = β̂^(1)`: the first segment contributes no parameters.
    #[default]
    FirstColumn,
    /// `β̂^(0) = 0`: a nonzero first column counts its own support
    /// (sensitivity-check alternative).
    Zero,
}

/// Number of estimated parameters of one solution path:
/// `Σ_i 1{β̂^(i) ≠ β̂^(i−1)} · #{b : |β̂_b^(i)| > tau_sparse}` with the column
/// change measured in ℓ2 against `tau_cp` and `β̂^(0)` given by `baseline`.
pub fn dim_count_with(
    solution: &NodeSolution,
    tau_cp: f64,
    tau_sparse: f64,
    baseline: DimBaseline,
) -> usize {
    let beta = &solution.beta;
    let n = beta.ncols();
    let width = beta.nrows();
    let mut total = 0usize;
    for i in 0..n {
        let mut diff2 = 0.0;
        if i == 0 {
            match baseline {
                DimBaseline::FirstColumn => continue,
                DimBaseline::Zero => {
                    for r in 0..width {
                        diff2 += beta[[r, 0]] * beta[[r, 0]];
                    }
                }
            }
        } else {
            for r in 0..width {
                let d = beta[[r, i]] - beta[[r, i - 1]];
                diff2 += d * d;
            }
        }
        if diff2.sqrt() > tau_cp {
            total += (0..width).filter(|&r| beta[[r, i]].abs() > tau_sparse).count();
        }
    }
    total
}

/// [`dim_count_with`] under the default thresholds and baseline.
pub fn dim_count(solution: &NodeSolution, tau_cp: f64, tau_sparse: f64) -> usize {
    dim_count_with(solution, tau_cp, tau_sparse, DimBaseline::FirstColumn)
}

/// Akaike criterion: mean over nodes of `2·L_a(β̂_a) + 2·Dim(β̂_a)`, with
/// `L_a` the summed conditional negative log-likelihood on `dataset`.
pub fn aic_with(
    solutions: &[NodeSolution],
    dataset: &SpinDataset,
    tau_cp: f64,
    tau_sparse: f64,
    baseline: DimBaseline,
) -> Result<f64> {
    if solutions.is_empty() {
        return Err(Error::InvalidConfig("aic needs at least one solution".into()));
    }
    let mut total = 0.0;
    for sol in solutions {
        let (loss, _) = node_loss_and_gradient(dataset, sol.node, &sol.beta)?;
        let dim = dim_count_with(sol, tau_cp, tau_sparse, baseline);
        total += 2.0 * loss + 2.0 * dim as f64;
    }
    Ok(total / solutions.len() as f64)
}

/// [`aic_with`] under the default thresholds and baseline.
pub fn aic(solutions: &[NodeSolution], dataset: &SpinDataset) -> Result<f64> {
    aic_with(solutions, dataset, TAU_CP, TAU_SPARSE, DimBaseline::FirstColumn)
}

/// ROC AUC of pooled `(score, label)` pairs with midrank tie handling:
/// `AUC = (Σ ranks of positives − P(P+1)/2) / (P·N)`. Sorts `pairs` in
/// place; errors with [`Error::UndefinedAuc`] when a class is missing.
pub fn roc_auc(pairs: &mut [(f64, bool)]) -> Result<f64> {
    let positives = pairs.iter().filter(|&&(_, l)| l).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes in the holdout, got {positives} positive / {negatives} negative"
        )));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0f64;
    let mut i = 0usize;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        let tied_positives = pairs[i..j].iter().filter(|&&(_, l)| l).count();
        rank_sum += midrank * tied_positives as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Held-out AUC of an estimated model: for every (node, timestamp, holdout
/// replicate) the score is the fitted conditional probability of `X_a = +1`
/// given the others under the segment's directed estimates, the label is the
/// observed spin, and all pairs are pooled into one ROC.
pub fn auc_score(model: &EstimatedModel, holdout: &SpinDataset) -> Result<f64> {
    if holdout.p() != model.p() || holdout.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "holdout is p={}, n={} but the model is p={}, n={}",
            holdout.p(),
            holdout.n(),
            model.p(),
            model.n()
        )));
    }
    let p = model.p();
    let mut pairs = Vec::with_capacity(holdout.total_samples() * p);
    let mut omega = vec![0.0f64; p - 1];
    let mut rest = vec![0i8; p - 1];
    for t in 1..=model.n() {
        let theta = model.graph_at(t)?.theta();
        let block = holdout.block(t - 1);
        for a in 0..p {
            let mut c = 0;
            for b in 0..p {
                if b != a {
                    omega[c] = theta[[a, b]];
                    c += 1;
                }
            }
            for l in 0..block.nrows() {
                let mut c = 0;
                for b in 0..p {
                    if b != a {
                        rest[c] = block[[l, b]];
                        c += 1;
                    }
                }
                let score = conditional_probability(&omega, 1, &rest)?;
                pairs.push((score, block[[l, a]] == 1));
            }
        }
    }
    roc_auc(&mut pairs)
}

/// Selection criterion of a hyperparameter search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Minimize the Akaike criterion on the training data.
    Aic,
    /// Maximize the pooled ROC AUC on a holdout.
    Auc,
}

/// Candidate enumeration strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SearchStrategy {
    /// Evenly spaced grid, endpoints included (a single point sits at the
    /// lower bound).
    Grid { lambda1_points: usize, lambda2_points: usize },
    /// Uniform random pairs in the rectangle.
    Random { num_points: usize },
}

/// Specification of a hyperparameter search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpec {
    pub strategy: SearchStrategy,
    pub lambda1_range: (f64, f64),
    pub lambda2_range: (f64, f64),
    pub criterion: Criterion,
    /// Seed of the random strategy (ignored by grids).
    #[serde(default)]
    pub seed: u64,
}

impl SearchSpec {
    fn validate(&self) -> Result<()> {
        let ok_range = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1 && r.0 >= 0.0;
        if !ok_range(self.lambda1_range) || !ok_range(self.lambda2_range) {
            return Err(Error::InvalidConfig(
                "lambda ranges must satisfy 0 ≤ lo ≤ hi and be finite".into(),
            ));
        }
        match self.strategy {
            SearchStrategy::Grid { lambda1_points, lambda2_points } => {
                if lambda1_points == 0 || lambda2_points == 0 {
                    return Err(Error::InvalidConfig("grid counts must be ≥ 1".into()));
                }
            }
            SearchStrategy::Random { num_points } => {
                if num_points == 0 {
                    return Err(Error::InvalidConfig("num_points must be ≥ 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Deterministic candidate list (grid in row-major order, random pairs
    /// from the seed).
    pub fn candidates(&self) -> Vec<(f64, f64)> {
        let linspace = |(lo, hi): (f64, f64), count: usize| -> Vec<f64> {
            if count == 1 {
                return vec![lo];
            }
            (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect()
        };
        match self.strategy {
            SearchStrategy::Grid { lambda1_points, lambda2_points } => {
                let l1s = linspace(self.lambda1_range, lambda1_points);
                let l2s = linspace(self.lambda2_range, lambda2_points);
                l1s.iter()
                    .flat_map(|&l1| l2s.iter().map(move |&l2| (l1, l2)))
                    .collect()
            }
            SearchStrategy::Random { num_points } => {
                let mut rng = derive_rng(self.seed, &[0x5EA2C4]);
                (0..num_points)
                    .map(|_| {
                        (
                            rng.gen_range(self.lambda1_range.0..=self.lambda1_range.1),
                            rng.gen_range(self.lambda2_range.0..=self.lambda2_range.1),
                        )
                    })
                    .collect()
            }
        }
    }
}

/// One evaluated candidate of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub lambda1: f64,
    pub lambda2: f64,
    /// AIC (lower is better) or AUC (higher is better) of this candidate.
    pub criterion_value: f64,
    pub num_change_points: usize,
}

/// Outcome of a hyperparameter search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Every evaluated candidate, in candidate order.
    pub trace: Vec<TracePoint>,
}

/// Evaluate every candidate pair by a full model fit and return the best
/// (min AIC / max AUC). Exact criterion ties break toward larger `λ1`, then
/// larger `λ2` (parsimony).
pub fn search(
    dataset: &SpinDataset,
    holdout: Option<&SpinDataset>,
    spec: &SearchSpec,
    fused: FusedNorm,
    solver: &SolverOptions,
    estimator: &EstimatorOptions,
) -> Result<SearchOutcome> {
    spec.validate()?;
    let holdout = match (spec.criterion, holdout) {
        (Criterion::Auc, None) => {
            return Err(Error::InvalidConfig(
                "AUC selection requires a holdout dataset".into(),
            ))
        }
        (Criterion::Auc, Some(h)) => Some(h),
        (Criterion::Aic, h) => h,
    };
    let mut trace = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None; // (criterion, λ1, λ2)
    for (lambda1, lambda2) in spec.candidates() {
        let penalty = PenaltyConfig { lambda1, lambda2, fused };
        let (model, solutions) = fit_model(dataset, &penalty, solver, estimator)?;
        let value = match spec.criterion {
            Criterion::Aic => aic(&solutions, dataset)?,
            Criterion::Auc => auc_score(&model, holdout.expect("checked above"))?,
        };
        trace.push(TracePoint {
            lambda1,
            lambda2,
            criterion_value: value,
            num_change_points: model.change_points().len(),
        });
        let better = match best {
            None => true,
            Some((bv, bl1, bl2)) => {
                let improved = match spec.criterion {
                    Criterion::Aic => value < bv,
                    Criterion::Auc => value > bv,
                };
                improved
                    || (value == bv
                        && (lambda1 > bl1 || (lambda1 == bl1 && lambda2 > bl2)))
            }
        };
        if better {
            best = Some((value, lambda1, lambda2));
        }
    }
    let (_, lambda1, lambda2) = best.expect("candidate list validated nonempty");
    Ok(SearchOutcome { lambda1, lambda2, trace })
}

/// True edge sets per timestamp of an estimated model (convenience for
/// evaluation pipelines).
pub fn edge_sets_per_timestamp(model: &EstimatedModel) -> Result<Vec<BTreeSet<(usize, usize)>>> {
    (1..=model.n()).map(|t| model.edges_at(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::SegmentGraph;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn fake_solution(node: usize, beta: Array2<f64>) -> NodeSolution {
        NodeSolution {
            node,
            beta,
            objective: 0.0,
            iterations: 1,
            stationarity_violation: 0.0,
            objective_trace: vec![0.0],
            prox_converged: true,
        }
    }

    #[test]
    fn dim_count_constant_path_is_zero() {
        let sol = fake_solution(0, array![[0.5, 0.5, 0.5], [0.0, 0.0, 0.0]]);
        assert_eq!(dim_count(&sol, TAU_CP, TAU_SPARSE), 0);
    }

    #[test]
    fn dim_count_counts_nonzeros_at_changes() {
        let beta = array![
            [0.5, 0.5, 0.7, 0.7, 0.9],
            [0.0, 0.0, -0.3, -0.3, -0.3],
            [0.2, 0.2, 0.4, 0.4, 0.0]
        ];
        let sol = fake_solution(0, beta);
        // Changes at columns 2 and 4 (0-based): 3 nonzeros then 2.
        assert_eq!(dim_count(&sol, TAU_CP, TAU_SPARSE), 5);
    }

    #[test]
    fn dim_count_zero_baseline_counts_first_column() {
        let sol = fake_solution(0, array![[0.5, 0.5], [0.3, 0.3]]);
        assert_eq!(dim_count_with(&sol, TAU_CP, TAU_SPARSE, DimBaseline::FirstColumn), 0);
        assert_eq!(dim_count_with(&sol, TAU_CP, TAU_SPARSE, DimBaseline::Zero), 2);
    }

    #[test]
    fn dim_count_invariant_to_doubling_nonzeros() {
        let beta = array![[0.5, 0.9], [0.0, -0.4]];
        let sol = fake_solution(0, beta.clone());
        let doubled = fake_solution(0, beta.mapv(|x| 2.0 * x));
        assert_eq!(
            dim_count(&sol, TAU_CP, TAU_SPARSE),
            dim_count(&doubled, TAU_CP, TAU_SPARSE)
        );
    }

    #[test]
    fn aic_at_origin_is_closed_form() {
        let ds = SpinDataset::new(
            3,
            vec![
                Array2::from_elem((4, 3), 1i8),
                Array2::from_elem((2, 3), -1i8),
            ],
        )
        .unwrap();
        let zeros = |node| fake_solution(node, Array2::zeros((2, 2)));
        let value = aic(&[zeros(0), zeros(1), zeros(2)], &ds).unwrap();
        assert_abs_diff_eq!(value, 2.0 * 6.0 * std::f64::consts::LN_2, epsilon = 1e-10);
    }

    #[test]
    fn aic_penalizes_spurious_changes_linearly() {
        let ds = SpinDataset::new(
            2,
            vec![Array2::from_elem((3, 2), 1i8), Array2::from_elem((3, 2), 1i8)],
        )
        .unwrap();
        // Same likelihood columns, one vs zero parameter jumps.
        let flat = fake_solution(0, array![[0.3, 0.3]]);
        let jumpy = fake_solution(0, array![[0.3, 0.3 + 1e-3]]);
        let base = aic(std::slice::from_ref(&flat), &ds).unwrap();
        let bumped = aic(std::slice::from_ref(&jumpy), &ds).unwrap();
        let (l_flat, _) = node_loss_and_gradient(&ds, 0, &flat.beta).unwrap();
        let (l_jump, _) = node_loss_and_gradient(&ds, 0, &jumpy.beta).unwrap();
        // Dim goes 0 → 1: AIC difference is 2 plus the likelihood shift.
        assert_abs_diff_eq!(
            bumped - base,
            2.0 + 2.0 * (l_jump - l_flat),
            epsilon = 1e-10
        );
    }

    #[test]
    fn auc_of_uninformative_scores_is_half() {
        let mut pairs = vec![(0.5, true), (0.5, false), (0.5, true), (0.5, false)];
        assert_abs_diff_eq!(roc_auc(&mut pairs).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn auc_of_perfectly_ordered_scores_is_one() {
        let mut pairs = vec![(0.1, false), (0.2, false), (0.8, true), (0.9, true)];
        assert_abs_diff_eq!(roc_auc(&mut pairs).unwrap(), 1.0, epsilon = 1e-15);
        let mut flipped: Vec<(f64, bool)> =
            pairs.iter().map(|&(s, l)| (s, !l)).collect();
        assert_abs_diff_eq!(roc_auc(&mut flipped).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn auc_label_flip_symmetry_with_ties() {
        let mut pairs = vec![
            (0.2, false),
            (0.4, true),
            (0.4, false),
            (0.4, false),
            (0.7, true),
            (0.9, false),
        ];
        let mut flipped: Vec<(f64, bool)> = pairs.iter().map(|&(s, l)| (s, !l)).collect();
        let auc = roc_auc(&mut pairs).unwrap();
        let auc_flipped = roc_auc(&mut flipped).unwrap();
        assert_abs_diff_eq!(auc + auc_flipped, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        let mut pairs = vec![(0.3, true), (0.6, true)];
        assert!(matches!(roc_auc(&mut pairs), Err(Error::UndefinedAuc(_))));
    }

    #[test]
    fn auc_score_checks_shapes() {
        let theta = Array2::zeros((3, 3));
        let model = EstimatedModel::new(
            2,
            3,
            vec![],
            vec![SegmentGraph::from_theta(theta, TAU_SPARSE).unwrap()],
        )
        .unwrap();
        let holdout = SpinDataset::new(3, vec![Array2::from_elem((2, 3), 1i8)]).unwrap();
        assert!(auc_score(&model, &holdout).is_err());
    }

    #[test]
    fn grid_candidates_cover_endpoints_in_order() {
        let spec = SearchSpec {
            strategy: SearchStrategy::Grid { lambda1_points: 2, lambda2_points: 3 },
            lambda1_range: (4.0, 15.0),
            lambda2_range: (30.0, 40.0),
            criterion: Criterion::Aic,
            seed: 0,
        };
        let cands = spec.candidates();
        assert_eq!(cands.len(), 6);
        assert_eq!(cands[0], (4.0, 30.0));
        assert_eq!(cands[2], (4.0, 40.0));
        assert_eq!(cands[5], (15.0, 40.0));
    }

    #[test]
    fn random_candidates_are_seeded_and_in_range() {
        let spec = SearchSpec {
            strategy: SearchStrategy::Random { num_points: 20 },
            lambda1_range: (4.0, 15.0),
            lambda2_range: (30.0, 40.0),
            criterion: Criterion::Auc,
            seed: 5,
        };
        let a = spec.candidates();
        let b = spec.candidates();
        assert_eq!(a, b);
        for &(l1, l2) in &a {
            assert!((4.0..=15.0).contains(&l1));
            assert!((30.0..=40.0).contains(&l2));
        }
    }

    #[test]
    fn search_single_point_returns_it() {
        let config = crate::sampler::ScenarioConfig {
            p: 3,
            n: 4,
            change_points: vec![],
            degree: 2,
            obs_per_timestamp: 20,
            holdout_per_timestamp: 0,
            burn_in: 40,
            lag: 2,
            seed: 3,
        };
        let ds = crate::sampler::generate_scenario(&config).unwrap().train;
        let spec = SearchSpec {
            strategy: SearchStrategy::Grid { lambda1_points: 1, lambda2_points: 1 },
            lambda1_range: (2.0, 2.0),
            lambda2_range: (1.0, 1.0),
            criterion: Criterion::Aic,
            seed: 0,
        };
        let out = search(
            &ds,
            None,
            &spec,
            FusedNorm::GroupL2,
            &SolverOptions::default(),
            &EstimatorOptions::default(),
        )
        .unwrap();
        assert_eq!((out.lambda1, out.lambda2), (2.0, 1.0));
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].lambda1, 2.0);
    }

    #[test]
    fn search_requires_holdout_for_auc() {
        let ds = SpinDataset::new(2, vec![Array2::from_elem((2, 2), 1i8)]).unwrap();
        let spec = SearchSpec {
            strategy: SearchStrategy::Grid { lambda1_points: 1, lambda2_points: 1 },
            lambda1_range: (1.0, 1.0),
            lambda2_range: (1.0, 1.0),
            criterion: Criterion::Auc,
            seed: 0,
        };
        assert!(search(
            &ds,
            None,
            &spec,
            FusedNorm::GroupL2,
            &SolverOptions::default(),
            &EstimatorOptions::default(),
        )
        .is_err());
    }
}
