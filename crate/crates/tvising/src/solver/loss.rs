//! Node-wise conditional negative log-likelihood and its gradient.
//!
//! For node `a` with parameter column `β^(i)` at timestamp `i`, each sample
//! contributes `log(e^z + e^{−z}) − x_a·z` with `z = ⟨β^(i), x_{∖a}⟩`. The
//! loss is the plain sum over all timestamps and replicates (no averaging),
//! so its gradient in column `i` is `Σ_l x_{∖a,l}·(tanh(z_l) − x_{a,l})`.

use ndarray::{Array1, Array2};

use crate::dataset::SpinDataset;
use crate::error::{Error, Result};

/// Numerically stable `log(e^z + e^{−z}) = |z| + log1p(e^{−2|z|})`.
#[inline]
pub(crate) fn log_two_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Per-node design: for each timestamp, the `n_i × (p−1)` matrix of the other
/// nodes' spins (removed-coordinate order) and the length-`n_i` target vector
/// of node `a`'s spins, all as `f64` so matrix products stay in BLAS-friendly
/// form.
#[derive(Debug, Clone)]
pub(crate) struct NodeDesign {
    features: Vec<Array2<f64>>,
    targets: Vec<Array1<f64>>,
    width: usize,
}

impl NodeDesign {
    /// Extract the design for `node` (0-based) from a dataset.
    pub(crate) fn new(dataset: &SpinDataset, node: usize) -> Result<Self> {
        let p = dataset.p();
        if node >= p {
            return Err(Error::NodeOutOfRange { node, p });
        }
        let width = p - 1;
        let mut features = Vec::with_capacity(dataset.n());
        let mut targets = Vec::with_capacity(dataset.n());
        for block in dataset.blocks() {
            let rows = block.nrows();
            let mut x = Array2::zeros((rows, width));
            let mut y = Array1::zeros(rows);
            for l in 0..rows {
                y[l] = f64::from(block[[l, node]]);
                let mut c = 0;
                for b in 0..p {
                    if b != node {
                        x[[l, c]] = f64::from(block[[l, b]]);
                        c += 1;
                    }
                }
            }
            features.push(x);
            targets.push(y);
        }
        Ok(NodeDesign { features, targets, width })
    }

    pub(crate) fn width(&self) -> usize {
        self.width
    }

    pub(crate) fn num_timestamps(&self) -> usize {
        self.features.len()
    }

    /// Total number of samples across timestamps.
    pub(crate) fn total_samples(&self) -> usize {
        self.targets.iter().map(Array1::len).sum()
    }

    /// Largest per-timestamp sample count.
    pub(crate) fn max_samples(&self) -> usize {
        self.targets.iter().map(Array1::len).max().unwrap_or(0)
    }

    /// Loss at `beta` in transposed layout (`n × (p−1)`, row `i` = `β^(i)`).
    pub(crate) fn loss(&self, beta_t: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for (i, (x, y)) in self.features.iter().zip(&self.targets).enumerate() {
            let z = x.dot(&beta_t.row(i));
            for (&zl, &yl) in z.iter().zip(y.iter()) {
                total += log_two_cosh(zl) - yl * zl;
            }
        }
        total
    }

    /// Loss and gradient at `beta` (transposed layout); the gradient is
    /// written into `grad` (same shape).
    pub(crate) fn loss_and_grad(&self, beta_t: &Array2<f64>, grad: &mut Array2<f64>) -> f64 {
        let mut total = 0.0;
        for (i, (x, y)) in self.features.iter().zip(&self.targets).enumerate() {
            let mut z = x.dot(&beta_t.row(i));
            for (zl, &yl) in z.iter_mut().zip(y.iter()) {
                total += log_two_cosh(*zl) - yl * *zl;
                *zl = zl.tanh() - yl;
            }
            grad.row_mut(i).assign(&x.t().dot(&z));
        }
        total
    }
}

/// Conditional negative log-likelihood of `beta` (spec orientation
/// `(p−1)×n`, column `i` = `β^(i)`) for one node, with its gradient in the
/// same shape. This is the smooth part of the node-wise objective.
pub fn node_loss_and_gradient(
    dataset: &SpinDataset,
    node: usize,
    beta: &Array2<f64>,
) -> Result<(f64, Array2<f64>)> {
    let design = NodeDesign::new(dataset, node)?;
    if beta.dim() != (design.width(), design.num_timestamps()) {
        return Err(Error::DimensionMismatch(format!(
            "beta must be {}×{}, got {}×{}",
            design.width(),
            design.num_timestamps(),
            beta.nrows(),
            beta.ncols()
        )));
    }
    let beta_t = beta.t().as_standard_layout().to_owned();
    let mut grad_t = Array2::zeros(beta_t.dim());
    let value = design.loss_and_grad(&beta_t, &mut grad_t);
    Ok((value, grad_t.t().as_standard_layout().to_owned()))
}
