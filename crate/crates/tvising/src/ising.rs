//! Exact Ising-model mathematics.
//!
//! A zero-field Ising model over `p` binary spins `x ∈ {−1,+1}^p` has
//! probability `P(x) = exp(Σ_{a<b} x_a x_b ω_ab) / Z(Ω)` for a symmetric
//! coupling matrix `Ω` with zero diagonal. The partition function `Z` is only
//! ever evaluated by exact enumeration (guarded by `p` limits); it exists as
//! a test oracle, not as an estimation tool.
//!
//! Node indices are 0-based in memory. Timestamps are 1-based everywhere,
//! matching the change-point convention `T_j ∈ {2..n}` with the sentinels
//! `T_0 = 1` and `T_{D+1} = n+1`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Largest `p` for which `joint_probability` will enumerate `Z(Ω)`.
pub const MAX_JOINT_P: usize = 20;
/// Largest `p` for which `enumerate_distribution` will build the full table.
pub const MAX_ENUMERATION_P: usize = 12;

/// A length-`p` spin configuration with entries in `{−1,+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    /// Validates that every entry is exactly −1 or +1.
    pub fn new(values: Vec<i8>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if v != 1 && v != -1 {
                return Err(Error::InvalidSpin {
                    row: 1,
                    column: i + 1,
                    value: v.to_string(),
                });
            }
        }
        Ok(SpinVector(values))
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Global spin flip `x → −x`.
    pub fn flipped(&self) -> SpinVector {
        SpinVector(self.0.iter().map(|v| -v).collect())
    }

    /// Index of this state in enumeration order: bit `a` is set iff `x_a = +1`.
    pub fn bitmask(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |m, (a, &v)| if v == 1 { m | (1 << a) } else { m })
    }

    /// Inverse of [`SpinVector::bitmask`] for a given `p`.
    pub fn from_bitmask(mask: usize, p: usize) -> SpinVector {
        SpinVector(
            (0..p)
                .map(|a| if mask & (1 << a) != 0 { 1 } else { -1 })
                .collect(),
        )
    }
}

/// Symmetric `p×p` coupling matrix with zero diagonal (one segment's `Θ`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: Array2<f64>,
}

impl WeightMatrix {
    /// Validates symmetry, zero diagonal, and finiteness.
    pub fn new(w: Array2<f64>) -> Result<Self> {
        let (r, c) = w.dim();
        if r != c {
            return Err(Error::InvalidWeights(format!("matrix is {r}×{c}, not square")));
        }
        if r < 2 {
            return Err(Error::InvalidWeights(format!("p = {r} < 2")));
        }
        for a in 0..r {
            if w[[a, a]] != 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "nonzero diagonal entry {} at node {}",
                    w[[a, a]],
                    a + 1
                )));
            }
            for b in 0..r {
                let v = w[[a, b]];
                if !v.is_finite() {
                    return Err(Error::InvalidWeights(format!(
                        "non-finite entry at ({}, {})",
                        a + 1,
                        b + 1
                    )));
                }
                if v != w[[b, a]] {
                    return Err(Error::InvalidWeights(format!(
                        "asymmetry at ({}, {}): {} vs {}",
                        a + 1,
                        b + 1,
                        v,
                        w[[b, a]]
                    )));
                }
            }
        }
        Ok(WeightMatrix { w })
    }

    /// Zero matrix (independent fair spins).
    pub fn zeros(p: usize) -> Result<Self> {
        WeightMatrix::new(Array2::zeros((p, p)))
    }

    /// Builds a matrix from 0-based unordered edges `(a, b, weight)`.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = Array2::zeros((p, p));
        for &(a, b, weight) in edges {
            if a >= p || b >= p {
                return Err(Error::NodeOutOfRange { node: a.max(b), p });
            }
            if a == b {
                return Err(Error::InvalidWeights(format!("self-loop at node {}", a + 1)));
            }
            w[[a, b]] = weight;
            w[[b, a]] = weight;
        }
        WeightMatrix::new(w)
    }

    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.w[[a, b]]
    }

    /// Couplings `ω_a` of node `a` with coordinate `a` removed, original order
    /// preserved (entry `j` couples to node `j` if `j < a`, else node `j+1`).
    pub fn neighbor_weights(&self, a: usize) -> Array1<f64> {
        let p = self.p();
        Array1::from_iter((0..p).filter(|&b| b != a).map(|b| self.w[[a, b]]))
    }

    /// Unordered nonzero edges as 0-based `(a, b, weight)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let p = self.p();
        let mut out = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                if self.w[[a, b]] != 0.0 {
                    out.push((a, b, self.w[[a, b]]));
                }
            }
        }
        out
    }

    /// Unordered nonzero edge pairs, 0-based, `a < b`.
    pub fn edge_set(&self) -> std::collections::BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|(a, b, _)| (a, b)).collect()
    }

    /// Interaction energy `Σ_{a<b} x_a x_b ω_ab`.
    pub fn energy(&self, x: &SpinVector) -> Result<f64> {
        let p = self.p();
        if x.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "spin vector length {} vs p = {}",
                x.len(),
                p
            )));
        }
        let s = x.values();
        let mut e = 0.0;
        for a in 0..p {
            for b in (a + 1)..p {
                e += f64::from(s[a]) * f64::from(s[b]) * self.w[[a, b]];
            }
        }
        Ok(e)
    }

    /// `log Z(Ω)` by exact enumeration in log-space (log-sum-exp), so that
    /// couplings up to |ω| ≈ 10 cannot overflow.
    pub fn log_partition(&self) -> Result<f64> {
        let p = self.p();
        if p > MAX_JOINT_P {
            return Err(Error::EnumerationTooLarge { p, max: MAX_JOINT_P });
        }
        let mut energies = Vec::with_capacity(1 << p);
        for mask in 0..(1usize << p) {
            let x = SpinVector::from_bitmask(mask, p);
            energies.push(self.energy(&x)?);
        }
        let m = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = energies.iter().map(|e| (e - m).exp()).sum();
        Ok(m + sum.ln())
    }

    /// Exact probability of one state: `exp(energy(x)) / Z(Ω)`.
    pub fn joint_probability(&self, x: &SpinVector) -> Result<f64> {
        let e = self.energy(x)?;
        let log_z = self.log_partition()?;
        Ok((e - log_z).exp())
    }

    /// Full distribution table over all `2^p` states, indexed by
    /// [`SpinVector::bitmask`]. Entries are positive and sum to 1.
    pub fn enumerate_distribution(&self) -> Result<Vec<(SpinVector, f64)>> {
        let p = self.p();
        if p > MAX_ENUMERATION_P {
            return Err(Error::EnumerationTooLarge {
                p,
                max: MAX_ENUMERATION_P,
            });
        }
        let log_z = self.log_partition()?;
        (0..(1usize << p))
            .map(|mask| {
                let x = SpinVector::from_bitmask(mask, p);
                let e = self.energy(&x)?;
                Ok((x, (e - log_z).exp()))
            })
            .collect()
    }
}

/// Conditional probability of one node's spin given the rest:
/// `P(x_a | x_{∖a}) = exp(2 x_a ⟨ω_a, x_{∖a}⟩) / (exp(2 x_a ⟨ω_a, x_{∖a}⟩) + 1)`.
///
/// `omega_a` pairs with `x_rest` in the removed-coordinate order of
/// [`WeightMatrix::neighbor_weights`].
pub fn conditional_probability(omega_a: &[f64], x_a: i8, x_rest: &[i8]) -> Result<f64> {
    if omega_a.len() != x_rest.len() {
        return Err(Error::DimensionMismatch(format!(
            "omega_a length {} vs x_rest length {}",
            omega_a.len(),
            x_rest.len()
        )));
    }
    if x_a != 1 && x_a != -1 {
        return Err(Error::InvalidSpin {
            row: 1,
            column: 1,
            value: x_a.to_string(),
        });
    }
    let z: f64 = omega_a
        .iter()
        .zip(x_rest)
        .map(|(&w, &x)| w * f64::from(x))
        .sum();
    Ok(sigmoid(2.0 * f64::from(x_a) * z))
}

/// Numerically stable logistic function `1 / (1 + exp(−t))`.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Piece-wise constant Ising model: `D` change-points `T_1 < … < T_D` in
/// `{2..n}` and `D+1` segment coupling matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseIsingModel {
    n: usize,
    change_points: Vec<usize>,
    segments: Vec<WeightMatrix>,
}

/// Model difficulty diagnostics (`Δ_min`, `ξ_min`).
///
/// For a static model (`D = 0`) the fields hold documented sentinels:
/// `delta_min = n` and `xi_min = +∞`, so static-data pipelines don't branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiagnostics {
    /// Minimal spacing `min_j (T_j − T_{j−1})` with `T_0 = 1`.
    pub delta_min: usize,
    /// Minimal ℓ2 parameter jump `min_{a,j} ‖θ_a^{(j+1)} − θ_a^{(j)}‖₂`.
    pub xi_min: f64,
}

impl PiecewiseIsingModel {
    pub fn new(n: usize, change_points: Vec<usize>, segments: Vec<WeightMatrix>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidChangePoints("horizon n must be ≥ 1".into()));
        }
        if segments.len() != change_points.len() + 1 {
            return Err(Error::InvalidChangePoints(format!(
                "{} segments for {} change points (need D+1)",
                segments.len(),
                change_points.len()
            )));
        }
        let mut prev = 1;
        for &t in &change_points {
            if t < 2 || t > n {
                return Err(Error::InvalidChangePoints(format!(
                    "change point {t} outside 2..={n}"
                )));
            }
            if t <= prev {
                return Err(Error::InvalidChangePoints(
                    "change points must be strictly increasing".into(),
                ));
            }
            prev = t;
        }
        let p = segments[0].p();
        if segments.iter().any(|s| s.p() != p) {
            return Err(Error::DimensionMismatch(
                "segment matrices disagree on p".into(),
            ));
        }
        Ok(PiecewiseIsingModel {
            n,
            change_points,
            segments,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.segments[0].p()
    }

    /// Detected/true change-point timestamps `T_1 < … < T_D` (1-based).
    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn segments(&self) -> &[WeightMatrix] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Index `j` of the segment containing timestamp `i` (1-based `i`):
    /// the unique `j` with `T_j ≤ i < T_{j+1}`, `T_0 = 1`, `T_{D+1} = n+1`.
    pub fn segment_index(&self, i: usize) -> Result<usize> {
        if i < 1 || i > self.n {
            return Err(Error::TimestampOutOfRange { t: i, n: self.n });
        }
        Ok(self.change_points.partition_point(|&t| t <= i))
    }

    /// Coupling matrix in force at timestamp `i` (1-based).
    pub fn weights_at(&self, i: usize) -> Result<&WeightMatrix> {
        Ok(&self.segments[self.segment_index(i)?])
    }

    /// True edge set at timestamp `i` (0-based node pairs, `a < b`).
    pub fn edges_at(&self, i: usize) -> Result<std::collections::BTreeSet<(usize, usize)>> {
        Ok(self.weights_at(i)?.edge_set())
    }

    /// Segment boundaries as 1-based half-open ranges `[start, end)`,
    /// including the sentinels: segment `j` covers `T_j ..T_{j+1}`.
    pub fn segment_ranges(&self) -> Vec<(usize, usize)> {
        let mut bounds = Vec::with_capacity(self.change_points.len() + 2);
        bounds.push(1);
        bounds.extend_from_slice(&self.change_points);
        bounds.push(self.n + 1);
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// `Δ_min` / `ξ_min` diagnostics (sentinels when `D = 0`).
    pub fn diagnostics(&self) -> ModelDiagnostics {
        if self.change_points.is_empty() {
            return ModelDiagnostics {
                delta_min: self.n,
                xi_min: f64::INFINITY,
            };
        }
        let mut delta_min = usize::MAX;
        let mut prev = 1usize;
        for &t in &self.change_points {
            delta_min = delta_min.min(t - prev);
            prev = t;
        }
        let p = self.p();
        let mut xi_min = f64::INFINITY;
        for j in 0..self.change_points.len() {
            for a in 0..p {
                let before = self.segments[j].neighbor_weights(a);
                let after = self.segments[j + 1].neighbor_weights(a);
                let jump = (&after - &before).mapv(|d| d * d).sum().sqrt();
                xi_min = xi_min.min(jump);
            }
        }
        ModelDiagnostics { delta_min, xi_min }
    }
}
