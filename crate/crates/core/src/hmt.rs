//! Hidden Markov tree decoding of wavelet activity states.
//!
//! Each level-0 coefficient roots a quad-tree whose binary states follow a
//! Markov chain from parent to child. Given per-coefficient likelihoods `d_in`
//! from AMP, one upward and one downward sum-product pass yield, for every
//! node, the extrinsic message `h_out` that excludes the node's own evidence.
//! Approximation coefficients join no tree and simply receive their prior.
//!
//! Pmfs are stored as `[p(s = 0), p(s = 1)]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::wavelet::QuadTreeIndex;

pub type Pmf = [f64; 2];

/// Default LLR saturation used by [`llr_to_pmf`].
pub const LLR_CLAMP: f64 = 30.0;

const PMF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HmtParams {
    /// Activity probability of tree roots (level 0).
    pub pi_root: f64,
    /// Activity probability of approximation coefficients.
    pub pi_approx: f64,
    /// `P(child active | parent active)` for parents at level `j = 0..J-2`.
    pub pi11: Vec<f64>,
    /// `P(child inactive | parent inactive)` for parents at level `j = 0..J-2`.
    pub pi00: Vec<f64>,
}

impl HmtParams {
    /// Level-independent activity `pi` everywhere: the tree carries no information.
    pub fn uninformative(pi: f64, pi_approx: f64, depth: usize) -> Self {
        let k = depth.saturating_sub(1);
        Self {
            pi_root: pi,
            pi_approx,
            pi11: vec![pi; k],
            pi00: vec![1.0 - pi; k],
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        let k = depth.saturating_sub(1);
        if self.pi11.len() != k || self.pi00.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: self.pi11.len().max(self.pi00.len()),
                context: "HMT transition arrays (J - 1 levels)",
            });
        }
        let all = [self.pi_root, self.pi_approx]
            .into_iter()
            .chain(self.pi11.iter().copied())
            .chain(self.pi00.iter().copied());
        for p in all {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "HMT probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Input likelihoods together with the decoder's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMessages {
    pub d_in: Vec<Pmf>,
    /// Extrinsic pmf from the tree; empty until decoded.
    pub h_out: Vec<Pmf>,
    /// `h_out * d_in`, normalized; empty until decoded.
    pub posterior: Vec<Pmf>,
}

impl StateMessages {
    pub fn from_likelihoods(d_in: Vec<Pmf>) -> Self {
        Self {
            d_in,
            h_out: Vec::new(),
            posterior: Vec::new(),
        }
    }

    pub fn from_llr(llr: &[f64]) -> Result<Self> {
        Ok(Self::from_likelihoods(llr_to_pmf(llr)?))
    }

    /// `h_out(1)` per coefficient.
    pub fn activity(&self) -> Vec<f64> {
        self.h_out.iter().map(|p| p[1]).collect()
    }
}

fn sigmoid_pair(l: f64) -> Pmf {
    if l >= 0.0 {
        let e = (-l).exp();
        [e / (1.0 + e), 1.0 / (1.0 + e)]
    } else {
        let e = l.exp();
        [1.0 / (1.0 + e), e / (1.0 + e)]
    }
}

/// LLRs `ln p(1)/p(0)` to pmfs, saturating finite values at `±clamp`.
/// Infinite LLRs map to the certain pmfs; NaN is rejected.
pub fn llr_to_pmf_clamped(llr: &[f64], clamp: f64) -> Result<Vec<Pmf>> {
    llr.iter()
        .map(|&l| {
            if l.is_nan() {
                Err(Error::InvalidParameter("NaN log-likelihood ratio".into()))
            } else if l == f64::INFINITY {
                Ok([0.0, 1.0])
            } else if l == f64::NEG_INFINITY {
                Ok([1.0, 0.0])
            } else {
                Ok(sigmoid_pair(l.clamp(-clamp, clamp)))
            }
        })
        .collect()
}

pub fn llr_to_pmf(llr: &[f64]) -> Result<Vec<Pmf>> {
    llr_to_pmf_clamped(llr, LLR_CLAMP)
}

pub fn pmf_to_llr(pmf: &[Pmf]) -> Vec<f64> {
    pmf.iter().map(|p| p[1].ln() - p[0].ln()).collect()
}

fn check_pmf(p: &Pmf) -> Result<()> {
    if p.iter().all(|v| v.is_finite() && *v >= 0.0) && (p[0] + p[1] - 1.0).abs() <= PMF_TOL {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("invalid pmf {p:?}")))
    }
}

fn normalize(p: Pmf) -> Result<Pmf> {
    let s = p[0] + p[1];
    if s > 0.0 && s.is_finite() {
        Ok([p[0] / s, p[1] / s])
    } else {
        Err(Error::InvalidParameter(
            "HMT evidence has zero probability under the tree prior".into(),
        ))
    }
}

/// Arbitrary forest of binary Markov states.
///
/// Roots take `prior_on[root]` as activity probability. Every other node `n`
/// draws its state from its parent's through `p11[n]` and `p00[n]`.
#[derive(Debug, Clone)]
pub struct Forest {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    prior_on: Vec<f64>,
    p11: Vec<f64>,
    p00: Vec<f64>,
}

impl Forest {
    pub fn new(
        parent: Vec<Option<usize>>,
        prior_on: Vec<f64>,
        p11: Vec<f64>,
        p00: Vec<f64>,
    ) -> Result<Self> {
        let n = parent.len();
        for (what, len) in [("root prior", prior_on.len()), ("p11", p11.len()), ("p00", p00.len())] {
            if len != n {
                return Err(Error::InvalidParameter(format!(
                    "forest {what} has {len} entries for {n} nodes"
                )));
            }
        }
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for (k, p) in parent.iter().enumerate() {
            match *p {
                Some(q) if q >= n || q == k => {
                    return Err(Error::InvalidParameter(format!("bad parent {q} of node {k}")))
                }
                Some(q) => children[q].push(k),
                None => roots.push(k),
            }
        }
        let probs = prior_on.iter().chain(&p11).chain(&p00);
        if probs.clone().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("forest probability outside [0, 1]".into()));
        }
        let f = Self {
            parent,
            children,
            roots,
            prior_on,
            p11,
            p00,
        };
        // every node must hang from a root, otherwise there is a cycle
        let reached: usize = f.roots.iter().map(|&r| f.subtree(r).len()).sum();
        if reached != n {
            return Err(Error::InvalidParameter("parent links contain a cycle".into()));
        }
        Ok(f)
    }

    /// The wavelet forest with approximation coefficients as isolated roots.
    pub fn from_quadtree(tree: &QuadTreeIndex, params: &HmtParams) -> Result<Self> {
        params.validate(tree.depth())?;
        let n = tree.n_total();
        let mut prior_on = vec![0.0; n];
        let mut p11 = vec![0.0; n];
        let mut p00 = vec![0.0; n];
        for k in 0..n {
            match tree.level(k) {
                None => prior_on[k] = params.pi_approx,
                Some(0) => prior_on[k] = params.pi_root,
                Some(j) => {
                    p11[k] = params.pi11[j - 1];
                    p00[k] = params.pi00[j - 1];
                }
            }
        }
        Self::new((0..n).map(|k| tree.parent(k)).collect(), prior_on, p11, p00)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Nodes of the subtree at `root`, parents before children.
    fn subtree(&self, root: usize) -> Vec<usize> {
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            order.extend_from_slice(&self.children[order[i]]);
            i += 1;
        }
        order
    }

    /// `P(s_child | s_parent)` as `[[P(0|0), P(1|0)], [P(0|1), P(1|1)]]`.
    fn transition(&self, child: usize) -> [[f64; 2]; 2] {
        let (p11, p00) = (self.p11[child], self.p00[child]);
        [[p00, 1.0 - p00], [1.0 - p11, p11]]
    }

    fn decode_tree(&self, root: usize, d_in: &[Pmf]) -> Result<Vec<(usize, Pmf)>> {
        let order = self.subtree(root);
        let local: std::collections::HashMap<usize, usize> =
            order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let len = order.len();

        // up[i](s_parent): message from node order[i] to its parent
        let mut up = vec![[1.0, 1.0]; len];
        for i in (1..len).rev() {
            let n = order[i];
            let mut b = d_in[n];
            for &k in &self.children[n] {
                let u = up[local[&k]];
                b = [b[0] * u[0], b[1] * u[1]];
            }
            let b = normalize(b)?;
            let t = self.transition(n);
            up[i] = normalize([
                t[0][0] * b[0] + t[0][1] * b[1],
                t[1][0] * b[0] + t[1][1] * b[1],
            ])?;
        }

        // down[i](s_n): message from the parent side into order[i]
        let mut down = vec![[1.0, 1.0]; len];
        let pi = self.prior_on[root];
        down[0] = [1.0 - pi, pi];
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            let n = order[i];
            let kids = &self.children[n];
            let mut h = down[i];
            for &k in kids {
                let u = up[local[&k]];
                h = [h[0] * u[0], h[1] * u[1]];
            }
            out.push((n, normalize(h)?));
            for &k in kids {
                let mut m = [down[i][0] * d_in[n][0], down[i][1] * d_in[n][1]];
                for &other in kids.iter().filter(|&&o| o != k) {
                    let u = up[local[&other]];
                    m = [m[0] * u[0], m[1] * u[1]];
                }
                let m = normalize(m)?;
                let t = self.transition(k);
                down[local[&k]] = normalize([
                    m[0] * t[0][0] + m[1] * t[1][0],
                    m[0] * t[0][1] + m[1] * t[1][1],
                ])?;
            }
        }
        Ok(out)
    }

    /// Extrinsic and posterior pmfs for every node.
    pub fn decode(&self, d_in: &[Pmf]) -> Result<StateMessages> {
        if d_in.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: d_in.len(),
                context: "HMT likelihood count",
            });
        }
        d_in.iter().try_for_each(check_pmf)?;
        let parts: Vec<Vec<(usize, Pmf)>> = self
            .roots
            .par_iter()
            .map(|&r| self.decode_tree(r, d_in))
            .collect::<Result<_>>()?;
        let mut h_out = vec![[0.0; 2]; self.len()];
        for (n, h) in parts.into_iter().flatten() {
            h_out[n] = h;
        }
        let posterior = h_out
            .iter()
            .zip(d_in)
            .map(|(h, d)| normalize([h[0] * d[0], h[1] * d[1]]))
            .collect::<Result<_>>()?;
        Ok(StateMessages {
            d_in: d_in.to_vec(),
            h_out,
            posterior,
        })
    }
}

/// One upward-downward pass over every quad-tree of `tree`.
pub fn hmt_decode(
    tree: &QuadTreeIndex,
    params: &HmtParams,
    msgs: &StateMessages,
) -> Result<StateMessages> {
    Forest::from_quadtree(tree, params)?.decode(&msgs.d_in)
}
