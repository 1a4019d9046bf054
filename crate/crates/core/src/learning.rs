//! Conjugate Gamma/Beta re-estimation of the model parameters between turbo rounds.
//!
//! Activity is approximated by the hard decision `L_n > 0`. Precisions get
//! Gamma posteriors from the AMP means on the active set, transition and
//! activity probabilities get Beta posteriors from counts, and each parameter is
//! replaced by the inverse posterior mean precision or the posterior mean
//! probability respectively.
//!
//! Per-level vectors of length `J + 1` are indexed by `level + 1`, so entry 0
//! belongs to the approximation coefficients.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::hmt::HmtParams;
use crate::measurement::LinearOperator;
use crate::wavelet::{Level, QuadTreeIndex};

/// Gamma hyperprior on a precision, shape `a` and rate `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub a: f64,
    pub b: f64,
}

impl GammaPrior {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Posterior after `count` zero-mean Gaussian samples with squared sum `sumsq`.
    pub fn posterior(&self, count: usize, sumsq: f64) -> Self {
        Self {
            a: self.a + 0.5 * count as f64,
            b: self.b + 0.5 * sumsq,
        }
    }

    pub fn mean_precision(&self) -> f64 {
        self.a / self.b
    }

    /// Variance implied by the mean precision, `b / a`.
    pub fn variance(&self) -> f64 {
        self.b / self.a
    }
}

/// Beta hyperprior on a probability, with pseudo-counts `c` (success) and `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior {
    pub c: f64,
    pub d: f64,
}

impl BetaPrior {
    pub fn new(c: f64, d: f64) -> Self {
        Self { c, d }
    }

    /// Counts `total` with the given mean.
    pub fn with_mean(mean: f64, total: f64) -> Self {
        Self {
            c: mean * total,
            d: (1.0 - mean) * total,
        }
    }

    pub fn mean(&self) -> f64 {
        self.c / (self.c + self.d)
    }

    pub fn posterior(&self, trials: usize, successes: usize) -> Self {
        Self {
            c: self.c + successes as f64,
            d: self.d + (trials - successes) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub gamma_noise: GammaPrior,
    /// Per level `-1..J-1`; the large-variance component in GM mode.
    pub gamma_level: Vec<GammaPrior>,
    /// Per level `-1..J-1`; GM small-variance component.
    pub gamma_small: Vec<GammaPrior>,
    pub beta_root: BetaPrior,
    pub beta_approx: BetaPrior,
    /// Per parent level `0..J-2`.
    pub beta_trans11: Vec<BetaPrior>,
    /// Per parent level `0..J-2`.
    pub beta_trans00: Vec<BetaPrior>,
}

/// Mean of the `P(stay inactive)` hyperprior used by [`HyperParams::defaults`]
/// for `N` coefficients.
pub fn default_pi00_mean(n_total: usize) -> f64 {
    1.0 - 1.0 / n_total as f64
}

impl HyperParams {
    /// Informative defaults for a quad-tree geometry.
    ///
    /// Signal precisions use `a_j = 1` with rates 10 for the approximation band,
    /// 1 for the coarser half of the wavelet levels and 0.1 for the finer half
    /// (exactly `[10, 1, 1, 0.1, 0.1]` for `J = 4`). GM small-variance rates are
    /// `1e-6` times the large ones. Beta counts sum to the level sizes.
    pub fn defaults(tree: &QuadTreeIndex) -> Self {
        Self::defaults_with_pi00(tree, default_pi00_mean(tree.n_total()))
    }

    pub fn defaults_with_pi00(tree: &QuadTreeIndex, pi00_mean: f64) -> Self {
        let depth = tree.depth();
        let n = tree.n_total() as f64;
        let size = |l: Level| tree.set_of(l).len() as f64;
        let gamma_level: Vec<GammaPrior> = std::iter::once(GammaPrior::new(1.0, 10.0))
            .chain((0..depth).map(|j| {
                let b = if 2 * j < depth { 1.0 } else { 0.1 };
                GammaPrior::new(1.0, b)
            }))
            .collect();
        let gamma_small = gamma_level
            .iter()
            .map(|g| GammaPrior::new(1.0, 1e-6 * g.b))
            .collect();
        let parents = 0..depth.saturating_sub(1);
        Self {
            gamma_noise: GammaPrior::new(1.0, 1e-6),
            gamma_level,
            gamma_small,
            beta_root: BetaPrior::with_mean(1.0 / n, size(Some(0))),
            beta_approx: BetaPrior::with_mean(1.0 - 1e-6, size(None)),
            beta_trans11: parents
                .clone()
                .map(|j| BetaPrior::with_mean(0.5, size(Some(j))))
                .collect(),
            beta_trans00: parents
                .map(|j| BetaPrior::with_mean(pi00_mean, size(Some(j))))
                .collect(),
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        let lv = depth + 1;
        let tr = depth.saturating_sub(1);
        if self.gamma_level.len() != lv || self.gamma_small.len() != lv {
            return Err(Error::Config(format!(
                "precision hyperparameters need {lv} levels"
            )));
        }
        if self.beta_trans11.len() != tr || self.beta_trans00.len() != tr {
            return Err(Error::Config(format!(
                "transition hyperparameters need {tr} levels"
            )));
        }
        let gammas = std::iter::once(&self.gamma_noise)
            .chain(&self.gamma_level)
            .chain(&self.gamma_small);
        for g in gammas {
            if !(g.a > 0.0 && g.b > 0.0 && g.a.is_finite() && g.b.is_finite()) {
                return Err(Error::Config(format!("Gamma parameters must be positive: {g:?}")));
            }
        }
        let betas = [&self.beta_root, &self.beta_approx]
            .into_iter()
            .chain(&self.beta_trans11)
            .chain(&self.beta_trans00);
        for b in betas {
            if !(b.c > 0.0 && b.d > 0.0 && b.c.is_finite() && b.d.is_finite()) {
                return Err(Error::Config(format!("Beta counts must be positive: {b:?}")));
            }
        }
        Ok(())
    }

    /// Prior-mean tree parameters.
    pub fn prior_hmt(&self) -> HmtParams {
        HmtParams {
            pi_root: self.beta_root.mean(),
            pi_approx: self.beta_approx.mean(),
            pi11: self.beta_trans11.iter().map(BetaPrior::mean).collect(),
            pi00: self.beta_trans00.iter().map(BetaPrior::mean).collect(),
        }
    }
}

/// Index into per-level vectors of length `J + 1`.
pub fn level_slot(level: Level) -> usize {
    level.map_or(0, |j| j + 1)
}

/// Hard activity decisions summarized per level.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// Indices with `L_n > 0`, per level `-1..J-1`.
    pub active_sets: Vec<Vec<usize>>,
    /// `|active_sets[l]|`.
    pub k_counts: Vec<usize>,
    /// Level sizes `N_j`.
    pub level_sizes: Vec<usize>,
    /// Edges from an active parent at level `j` to an active child.
    pub c_counts: Vec<usize>,
    /// Edges leaving an active parent at level `j`.
    pub trial_counts: Vec<usize>,
    /// Edges from an inactive parent at level `j` to an inactive child.
    pub c00_counts: Vec<usize>,
    /// Edges leaving an inactive parent at level `j`.
    pub trial00_counts: Vec<usize>,
}

pub fn extract_support(llr: &[f64], tree: &QuadTreeIndex) -> Result<SupportEstimate> {
    if llr.len() != tree.n_total() {
        return Err(Error::DimensionMismatch {
            expected: tree.n_total(),
            actual: llr.len(),
            context: "LLR count",
        });
    }
    let depth = tree.depth();
    let on = |n: usize| llr[n] > 0.0;
    let labels = std::iter::once(None).chain((0..depth).map(Some));
    let active_sets: Vec<Vec<usize>> = labels
        .clone()
        .map(|l| tree.set_of(l).iter().copied().filter(|&n| on(n)).collect())
        .collect();
    let level_sizes = labels.map(|l| tree.set_of(l).len()).collect();
    let tr = depth.saturating_sub(1);
    let (mut c11, mut t11, mut c00, mut t00) = (vec![0; tr], vec![0; tr], vec![0; tr], vec![0; tr]);
    for j in 0..tr {
        for &p in tree.level_set(j) {
            let kids = tree.children(p);
            let active_kids = kids.iter().filter(|&&k| on(k)).count();
            if on(p) {
                t11[j] += kids.len();
                c11[j] += active_kids;
            } else {
                t00[j] += kids.len();
                c00[j] += kids.len() - active_kids;
            }
        }
    }
    Ok(SupportEstimate {
        k_counts: active_sets.iter().map(Vec::len).collect(),
        active_sets,
        level_sizes,
        c_counts: c11,
        trial_counts: t11,
        c00_counts: c00,
        trial00_counts: t00,
    })
}

fn sumsq(mu: ArrayView1<f64>, idx: &[usize]) -> f64 {
    idx.iter().map(|&n| mu[n] * mu[n]).sum()
}

/// Per-level signal variances `b_hat / a_hat` from the active AMP means.
pub fn update_precisions(
    hyper: &HyperParams,
    support: &SupportEstimate,
    mu: ArrayView1<f64>,
) -> Vec<f64> {
    hyper
        .gamma_level
        .iter()
        .zip(&support.active_sets)
        .map(|(g, set)| g.posterior(set.len(), sumsq(mu, set)).variance())
        .collect()
}

/// Posterior-mean tree parameters from the support counts.
pub fn update_transitions(hyper: &HyperParams, support: &SupportEstimate) -> HmtParams {
    let tr = hyper.beta_trans11.len();
    HmtParams {
        pi_root: hyper
            .beta_root
            .posterior(support.level_sizes[1], support.k_counts[1])
            .mean(),
        pi_approx: hyper
            .beta_approx
            .posterior(support.level_sizes[0], support.k_counts[0])
            .mean(),
        pi11: (0..tr)
            .map(|j| {
                hyper.beta_trans11[j]
                    .posterior(support.trial_counts[j], support.c_counts[j])
                    .mean()
            })
            .collect(),
        pi00: (0..tr)
            .map(|j| {
                hyper.beta_trans00[j]
                    .posterior(support.trial00_counts[j], support.c00_counts[j])
                    .mean()
            })
            .collect(),
    }
}

/// Noise variance from the residual `y - A mu`.
pub fn update_noise<A: LinearOperator + ?Sized>(
    prior: &GammaPrior,
    y: ArrayView1<f64>,
    a: &A,
    mu: ArrayView1<f64>,
) -> Result<f64> {
    if y.len() != a.rows() || mu.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
            context: "noise update operator",
        });
    }
    let r = &y - &a.apply(mu);
    Ok(prior.posterior(y.len(), r.dot(&r)).variance())
}

/// Per-level `(large, small)` GM variances: coefficients with `L_n > 0` inform
/// the large component, the rest the small one.
pub fn update_gm_variances(
    hyper: &HyperParams,
    llr: &[f64],
    mu: ArrayView1<f64>,
    tree: &QuadTreeIndex,
) -> Vec<(f64, f64)> {
    let labels = std::iter::once(None).chain((0..tree.depth()).map(Some));
    labels
        .map(|l| {
            let (on, off): (Vec<usize>, Vec<usize>) =
                tree.set_of(l).iter().partition(|&&n| llr[n] > 0.0);
            let slot = level_slot(l);
            let large = hyper.gamma_level[slot].posterior(on.len(), sumsq(mu, &on));
            let small = hyper.gamma_small[slot].posterior(off.len(), sumsq(mu, &off));
            (large.variance(), small.variance())
        })
        .collect()
}
