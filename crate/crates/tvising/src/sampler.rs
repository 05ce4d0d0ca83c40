//! Seeded synthetic-benchmark generation.
//!
//! Scenario recipe: one independent random `d`-regular graph per segment with
//! edge weights drawn uniformly from `[−1,−0.5] ∪ [0.5,1]`, sampled by
//! single-site Gibbs with a burn-in of 1000 full sweeps and a thinning lag of
//! 20 sweeps between emitted states (both configurable).
//!
//! Everything is deterministic given the scenario seed: each segment derives
//! its own sub-generators from `(seed, segment index)`, so segments are
//! sampled from distinct chains with no cross-segment state carryover and
//! results are independent of scheduling.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::dataset::SpinDataset;
use crate::error::{Error, Result};
use crate::ising::{sigmoid, PiecewiseIsingModel, SpinVector, WeightMatrix};

/// Default Gibbs burn-in (full sweeps).
pub const DEFAULT_BURN_IN: usize = 1000;
/// Default Gibbs thinning lag (full sweeps between emitted states).
pub const DEFAULT_LAG: usize = 20;

/// Synthetic-scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Node count `p`.
    pub p: usize,
    /// Horizon `n` (timestamps).
    pub n: usize,
    /// True change points, strictly increasing within `{2..n}`.
    #[serde(default)]
    pub change_points: Vec<usize>,
    /// Regular-graph degree `d` (requires `d·p` even, `0 < d < p`).
    pub degree: usize,
    /// Training observations per timestamp `n^(i)`.
    pub obs_per_timestamp: usize,
    /// Extra held-out observations per timestamp (0 disables the holdout).
    #[serde(default)]
    pub holdout_per_timestamp: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_lag")]
    pub lag: usize,
    pub seed: u64,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_lag() -> usize {
    DEFAULT_LAG
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidConfig(format!("p = {} < 2", self.p)));
        }
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be ≥ 1".into()));
        }
        if self.degree == 0 || self.degree >= self.p {
            return Err(Error::InvalidConfig(format!(
                "degree {} must satisfy 0 < d < p = {}",
                self.degree, self.p
            )));
        }
        if !(self.degree * self.p).is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "d·p = {}·{} is odd; no d-regular graph exists",
                self.degree, self.p
            )));
        }
        if self.obs_per_timestamp < 1 {
            return Err(Error::InvalidConfig("obs_per_timestamp must be ≥ 1".into()));
        }
        if self.lag < 1 {
            return Err(Error::InvalidConfig("lag must be ≥ 1".into()));
        }
        let mut prev = 1;
        for &t in &self.change_points {
            if t < 2 || t > self.n || t <= prev {
                return Err(Error::InvalidChangePoints(format!(
                    "change point {t} invalid for n = {}",
                    self.n
                )));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Everything `generate_scenario` produces: the ground-truth model, the
/// training data, the optional holdout, and per-timestamp true edge sets
/// (0-based unordered pairs).
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub model: PiecewiseIsingModel,
    pub train: SpinDataset,
    /// `None` when `holdout_per_timestamp = 0`.
    pub holdout: Option<SpinDataset>,
    pub true_edges: Vec<BTreeSet<(usize, usize)>>,
}

/// SplitMix64 finalizer: a well-mixed 64-bit permutation.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent generator from a root seed and a role path (e.g.
/// `[segment, purpose]`), so concurrent units get schedule-independent
/// streams: the path is absorbed into a mixed state, then expanded into a
/// 256-bit ChaCha key.
pub(crate) fn derive_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6A09_E667_F3BC_C908;
    for &part in path {
        state = mix64(state ^ mix64(part.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = mix64(state.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform random `d`-regular graph on `p` nodes via the configuration
/// (pairing) model: shuffle `d` stubs per node, pair them up, and restart on
/// any self-loop or repeated edge.
pub fn random_regular_graph(p: usize, d: usize, seed: u64) -> Result<Array2<u8>> {
    random_regular_graph_rng(p, d, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn random_regular_graph_rng(
    p: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<u8>> {
    if d == 0 || d >= p {
        return Err(Error::InvalidConfig(format!(
            "degree {d} must satisfy 0 < d < p = {p}"
        )));
    }
    if !(d * p).is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "d·p = {d}·{p} is odd; no d-regular graph exists"
        )));
    }
    let mut stubs: Vec<usize> = (0..p).flat_map(|a| std::iter::repeat_n(a, d)).collect();
    const MAX_ATTEMPTS: usize = 100_000;
    'attempt: for _ in 0..MAX_ATTEMPTS {
        stubs.shuffle(rng);
        let mut adj: Array2<u8> = Array2::zeros((p, p));
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || adj[[a, b]] == 1 {
                continue 'attempt; // self-loop or multi-edge: restart
            }
            adj[[a, b]] = 1;
            adj[[b, a]] = 1;
        }
        return Ok(adj);
    }
    Err(Error::InvalidConfig(format!(
        "could not realize a simple {d}-regular graph on {p} nodes after {MAX_ATTEMPTS} attempts"
    )))
}

/// Random couplings on a fixed adjacency: each edge gets `|w| ~ U[0.5, 1)`
/// with an independent fair sign; non-edges stay zero.
pub fn random_weights(adjacency: &Array2<u8>, seed: u64) -> Result<WeightMatrix> {
    random_weights_rng(adjacency, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn random_weights_rng(
    adjacency: &Array2<u8>,
    rng: &mut ChaCha8Rng,
) -> Result<WeightMatrix> {
    let p = adjacency.nrows();
    if adjacency.ncols() != p {
        return Err(Error::DimensionMismatch("adjacency must be square".into()));
    }
    let mut w = Array2::zeros((p, p));
    for a in 0..p {
        for b in (a + 1)..p {
            if adjacency[[a, b]] != 0 {
                let magnitude = rng.gen_range(0.5..1.0);
                let value = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
                w[[a, b]] = value;
                w[[b, a]] = value;
            }
        }
    }
    WeightMatrix::new(w)
}

/// Single-site Gibbs sampler.
///
/// One *sweep* resamples every node once in fixed ascending order from the
/// exact conditional `P(x_a | x_{∖a})`. The chain starts from a uniform
/// random ±1 state, discards `burn_in` sweeps, then emits one state after
/// every further `lag` sweeps (so emission `k` has seen
/// `burn_in + (k+1)·lag` sweeps).
pub fn gibbs_sample(
    model: &WeightMatrix,
    count: usize,
    burn_in: usize,
    lag: usize,
    seed: u64,
) -> Result<Vec<SpinVector>> {
    let mut chain = GibbsChain::new(model, burn_in, ChaCha8Rng::seed_from_u64(seed))?;
    if count < 1 {
        return Err(Error::InvalidConfig("sample count must be ≥ 1".into()));
    }
    (0..count).map(|_| chain.draw(lag)).collect()
}

/// A running Gibbs chain; `generate_scenario` keeps one per segment.
pub(crate) struct GibbsChain<'a> {
    w: &'a WeightMatrix,
    state: Vec<i8>,
    rng: ChaCha8Rng,
}

impl<'a> GibbsChain<'a> {
    /// Starts a chain from a uniform random state and runs the burn-in.
    pub(crate) fn new(w: &'a WeightMatrix, burn_in: usize, mut rng: ChaCha8Rng) -> Result<Self> {
        let p = w.p();
        let state = (0..p)
            .map(|_| if rng.gen_bool(0.5) { 1i8 } else { -1i8 })
            .collect();
        let mut chain = GibbsChain { w, state, rng };
        for _ in 0..burn_in {
            chain.sweep();
        }
        Ok(chain)
    }

    fn sweep(&mut self) {
        let p = self.w.p();
        for a in 0..p {
            let mut z = 0.0;
            for b in 0..p {
                if b != a {
                    z += self.w.weight(a, b) * f64::from(self.state[b]);
                }
            }
            let p_up = sigmoid(2.0 * z);
            self.state[a] = if self.rng.gen::<f64>() < p_up { 1 } else { -1 };
        }
    }

    /// Advances `lag` sweeps and returns the resulting state.
    pub(crate) fn draw(&mut self, lag: usize) -> Result<SpinVector> {
        if lag < 1 {
            return Err(Error::InvalidConfig("lag must be ≥ 1".into()));
        }
        for _ in 0..lag {
            self.sweep();
        }
        SpinVector::new(self.state.clone())
    }
}

/// Generates the full synthetic scenario: ground-truth model, train/holdout
/// datasets, and per-timestamp true edge sets.
///
/// For each segment, a fresh chain supplies `obs + holdout` states per
/// timestamp from the same stream; the first `obs` go to the training block
/// and the rest to the holdout block, so both share the segment distribution.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<GeneratedScenario> {
    config.validate()?;
    let p = config.p;
    let mut boundaries = Vec::with_capacity(config.change_points.len() + 2);
    boundaries.push(1usize);
    boundaries.extend_from_slice(&config.change_points);
    boundaries.push(config.n + 1);

    let mut segments = Vec::new();
    let mut train_blocks: Vec<Array2<i8>> = Vec::with_capacity(config.n);
    let mut holdout_blocks: Vec<Array2<i8>> = Vec::with_capacity(config.n);
    let per_t = config.obs_per_timestamp + config.holdout_per_timestamp;

    for (j, window) in boundaries.windows(2).enumerate() {
        let (start, end) = (window[0], window[1]);
        let seg = j as u64;
        let adj = random_regular_graph_rng(p, config.degree, &mut derive_rng(config.seed, &[seg, 0]))?;
        let weights = random_weights_rng(&adj, &mut derive_rng(config.seed, &[seg, 1]))?;
        let mut chain =
            GibbsChain::new(&weights, config.burn_in, derive_rng(config.seed, &[seg, 2]))?;
        for _t in start..end {
            let mut train = Array2::zeros((config.obs_per_timestamp, p));
            let mut holdout = Array2::zeros((config.holdout_per_timestamp, p));
            for r in 0..per_t {
                let x = chain.draw(config.lag)?;
                let row = x.values();
                if r < config.obs_per_timestamp {
                    for c in 0..p {
                        train[[r, c]] = row[c];
                    }
                } else {
                    for c in 0..p {
                        holdout[[r - config.obs_per_timestamp, c]] = row[c];
                    }
                }
            }
            train_blocks.push(train);
            holdout_blocks.push(holdout);
        }
        segments.push(weights);
    }

    let model = PiecewiseIsingModel::new(config.n, config.change_points.clone(), segments)?;
    let true_edges = (1..=config.n)
        .map(|t| model.edges_at(t))
        .collect::<Result<Vec<_>>>()?;
    let train = SpinDataset::new(p, train_blocks)?;
    let holdout = if config.holdout_per_timestamp > 0 {
        Some(SpinDataset::new(p, holdout_blocks)?)
    } else {
        None
    };
    Ok(GeneratedScenario {
        model,
        train,
        holdout,
        true_edges,
    })
}
