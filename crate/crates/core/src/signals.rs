//! Synthetic coefficient vectors for experiments and tests.

use ndarray::Array1;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::learning::level_slot;
use crate::wavelet::QuadTreeIndex;

/// `k` i.i.d. `N(0, var)` entries at uniformly chosen positions, zeros elsewhere.
pub fn bernoulli_gaussian(n: usize, k: usize, var: f64, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut theta = Array1::zeros(n);
    let sd = var.sqrt();
    for idx in sample(&mut rng, n, k.min(n)) {
        theta[idx] = sd * rng.sample::<f64, _>(StandardNormal);
    }
    theta
}

/// Parameters of [`tree_sparse`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSparseSpec {
    /// Number of level-0 roots made active.
    pub active_roots: usize,
    /// Probability that a child of an active node is active.
    pub p_child: f64,
    /// Coefficient variance per level `-1..J-1`.
    pub level_variances: Vec<f64>,
}

impl TreeSparseSpec {
    /// Variances decaying by 4 per level from 10 in the approximation band.
    pub fn decaying(depth: usize, active_roots: usize, p_child: f64) -> Self {
        Self {
            active_roots,
            p_child,
            level_variances: (0..=depth).map(|l| 10.0 / 4f64.powi(l as i32)).collect(),
        }
    }
}

/// Exactly tree-sparse coefficients: all approximation coefficients and a
/// connected active subtree under each chosen root; everything else is zero.
pub fn tree_sparse(tree: &QuadTreeIndex, spec: &TreeSparseSpec, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut theta = Array1::zeros(tree.n_total());
    let draw = |rng: &mut ChaCha20Rng, n: usize| {
        let sd = spec.level_variances[level_slot(tree.level(n))].sqrt();
        sd * rng.sample::<f64, _>(StandardNormal)
    };
    for &a in tree.approx_set() {
        theta[a] = draw(&mut rng, a);
    }
    let roots = tree.roots();
    let mut stack: Vec<usize> = sample(&mut rng, roots.len(), spec.active_roots.min(roots.len()))
        .into_iter()
        .map(|i| roots[i])
        .collect();
    while let Some(n) = stack.pop() {
        theta[n] = draw(&mut rng, n);
        for &k in tree.children(n) {
            if rng.random::<f64>() < spec.p_child {
                stack.push(k);
            }
        }
    }
    theta
}
