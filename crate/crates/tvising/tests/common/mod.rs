//! Shared oracles for the integration suites: everything here is an
//! independent re-derivation (no calls into the code paths under test).

// Each integration-test binary compiles this module but uses its own subset
// of the oracles.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvising::solver::{FusedNorm, PenaltyConfig};
use tvising::SpinDataset;

/// Seeded generator for test-local randomness.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Conditional negative log-likelihood of one node, recomputed from scratch:
/// `Σ_{i,l} log(e^z + e^{−z}) − x_a·z` with `z = ⟨β^(i), x_{∖a}⟩`, summed
/// over every replicate of every timestamp, evaluated stably.
pub fn node_nll(dataset: &SpinDataset, node: usize, beta: &Array2<f64>) -> f64 {
    let mut loss = 0.0;
    for i in 0..dataset.n() {
        let block = dataset.block(i);
        for row in block.rows() {
            let mut z = 0.0;
            let mut r = 0;
            for b in 0..dataset.p() {
                if b == node {
                    continue;
                }
                z += beta[[r, i]] * f64::from(row[b]);
                r += 1;
            }
            loss += z.abs() + (-2.0 * z.abs()).exp().ln_1p() - f64::from(row[node]) * z;
        }
    }
    loss
}

/// Penalty value recomputed from scratch (independent of the library's
/// internal penalty evaluation).
pub fn penalty_value(beta: &Array2<f64>, penalty: &PenaltyConfig) -> f64 {
    let n = beta.ncols();
    let mut fused = 0.0;
    for i in 1..n {
        let diff = &beta.column(i) - &beta.column(i - 1);
        fused += match penalty.fused {
            FusedNorm::GroupL2 => diff.mapv(|d| d * d).sum().sqrt(),
            FusedNorm::L1 => diff.mapv(f64::abs).sum(),
        };
    }
    let lasso: f64 = beta.iter().map(|b| b.abs()).sum();
    penalty.lambda1 * fused + penalty.lambda2 * lasso
}

/// Full node objective (loss + penalty) at an arbitrary point.
pub fn objective_at(
    dataset: &SpinDataset,
    node: usize,
    beta: &Array2<f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    node_nll(dataset, node, beta) + penalty_value(beta, penalty)
}

/// One subgradient of the node objective at `beta` (from-scratch loss
/// gradient plus an arbitrary-but-valid selection from each penalty
/// subdifferential).
fn subgradient(
    dataset: &SpinDataset,
    node: usize,
    beta: &Array2<f64>,
    penalty: &PenaltyConfig,
) -> (f64, Array2<f64>) {
    let (rows, n) = beta.dim();
    let mut g = Array2::<f64>::zeros((rows, n));
    let mut loss = 0.0;
    for i in 0..dataset.n() {
        let block = dataset.block(i);
        for row in block.rows() {
            let mut z = 0.0;
            let mut r = 0;
            for b in 0..dataset.p() {
                if b == node {
                    continue;
                }
                z += beta[[r, i]] * f64::from(row[b]);
                r += 1;
            }
            let xa = f64::from(row[node]);
            loss += z.abs() + (-2.0 * z.abs()).exp().ln_1p() - xa * z;
            let slope = z.tanh() - xa;
            r = 0;
            for b in 0..dataset.p() {
                if b == node {
                    continue;
                }
                g[[r, i]] += f64::from(row[b]) * slope;
                r += 1;
            }
        }
    }
    for i in 1..n {
        match penalty.fused {
            FusedNorm::GroupL2 => {
                let diff = &beta.column(i) - &beta.column(i - 1);
                let norm = diff.mapv(|d| d * d).sum().sqrt();
                if norm > 0.0 {
                    for r in 0..rows {
                        let u = penalty.lambda1 * diff[r] / norm;
                        g[[r, i]] += u;
                        g[[r, i - 1]] -= u;
                    }
                }
            }
            FusedNorm::L1 => {
                for r in 0..rows {
                    let d = beta[[r, i]] - beta[[r, i - 1]];
                    if d != 0.0 {
                        let u = penalty.lambda1 * d.signum();
                        g[[r, i]] += u;
                        g[[r, i - 1]] -= u;
                    }
                }
            }
        }
    }
    for (gv, &bv) in g.iter_mut().zip(beta.iter()) {
        if bv != 0.0 {
            *gv += penalty.lambda2 * bv.signum();
        }
    }
    (loss + penalty_value(beta, penalty), g)
}

/// One adaptive-Polyak descent run from `x0`; returns the best value seen.
fn polyak_descent(
    dataset: &SpinDataset,
    node: usize,
    penalty: &PenaltyConfig,
    steps: usize,
    mut x: Array2<f64>,
) -> f64 {
    let f0 = objective_at(dataset, node, &x, penalty);
    let mut f_best = f0;
    let mut delta = 0.05 * (1.0 + f0.abs());
    let mut window_best = f_best;
    const WINDOW: usize = 400;

    for k in 0..steps {
        let (f, g) = subgradient(dataset, node, &x, penalty);
        if f < f_best {
            f_best = f;
        }
        let g_sq = g.iter().map(|v| v * v).sum::<f64>();
        if g_sq <= 1e-30 {
            break;
        }
        // Polyak step toward the moving target `f_best − δ`.
        let step = (f - (f_best - delta)).max(0.0) / g_sq;
        x.zip_mut_with(&g, |xv, &gv| *xv -= step * gv);

        if (k + 1) % WINDOW == 0 {
            if window_best - f_best < 0.25 * delta {
                delta = (delta * 0.5).max(1e-14 * (1.0 + f_best.abs()));
            }
            window_best = f_best;
        }
    }
    f_best
}

/// Independent optimum-value oracle for the nonsmooth node objective:
/// adaptive-Polyak subgradient descent from the origin and, when given, from
/// a warm start (a candidate solution the descent then tries to beat). With
/// a couple hundred thousand steps this resolves the optimal value beyond
/// the 1e−5 relative tolerance it certifies.
pub fn subgradient_optimum(
    dataset: &SpinDataset,
    node: usize,
    penalty: &PenaltyConfig,
    steps: usize,
    warm: Option<&Array2<f64>>,
) -> f64 {
    let p = dataset.p();
    let n = dataset.n();
    let cold = polyak_descent(dataset, node, penalty, steps, Array2::zeros((p - 1, n)));
    match warm {
        Some(start) => cold.min(polyak_descent(dataset, node, penalty, steps, start.clone())),
        None => cold,
    }
}

/// Exhaustive fused-lasso oracle: enumerates every boundary sign pattern in
/// `{−1, 0, +1}^(n−1)`, solves the implied piece-wise constant weighted
/// average, and keeps the candidate with the lowest objective. Exponential —
/// keep `n ≤ 9`.
pub fn brute_force_fused_1d(v: &[f64], tau: f64) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 1 && n <= 9, "oracle is exponential in n");
    if n == 1 {
        return v.to_vec();
    }
    let objective = |x: &[f64]| -> f64 {
        let fit: f64 = x.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        let tv: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        fit + tau * tv
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 3usize.pow((n - 1) as u32);
    for code in 0..patterns {
        // Decode boundary signs: s[i] is the sign of x[i+1] − x[i].
        let mut signs = Vec::with_capacity(n - 1);
        let mut c = code;
        for _ in 0..n - 1 {
            signs.push((c % 3) as i64 - 1);
            c /= 3;
        }
        // Blocks are maximal runs of zero-sign boundaries; each block's value
        // is its data mean shifted by the boundary tensions.
        let mut x = vec![0.0; n];
        let mut start = 0;
        while start < n {
            let mut end = start;
            while end + 1 < n && signs[end] == 0 {
                end += 1;
            }
            let sum: f64 = v[start..=end].iter().sum();
            let left = if start == 0 { 0.0 } else { signs[start - 1] as f64 };
            let right = if end == n - 1 { 0.0 } else { signs[end] as f64 };
            let value = (sum - tau * left + tau * right) / (end - start + 1) as f64;
            for xv in &mut x[start..=end] {
                *xv = value;
            }
            start = end + 1;
        }
        let f = objective(&x);
        if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
            best = Some((f, x));
        }
    }
    best.unwrap().1
}

/// O(N²) pairwise AUC oracle with half-credit for ties.
pub fn pairwise_auc(pairs: &[(f64, bool)]) -> Option<f64> {
    let positives: Vec<f64> = pairs.iter().filter(|&&(_, l)| l).map(|&(s, _)| s).collect();
    let negatives: Vec<f64> = pairs.iter().filter(|&&(_, l)| !l).map(|&(s, _)| s).collect();
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &sp in &positives {
        for &sn in &negatives {
            if sp > sn {
                total += 1.0;
            } else if sp == sn {
                total += 0.5;
            }
        }
    }
    Some(total / (positives.len() as f64 * negatives.len() as f64))
}

/// Median of a scratch slice (sorted in place).
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Uniform draw on `[lo, hi]`.
pub fn uniform<R: Rng>(r: &mut R, lo: f64, hi: f64) -> f64 {
    r.gen_range(lo..=hi)
}
