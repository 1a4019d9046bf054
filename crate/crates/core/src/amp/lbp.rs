//! Full per-edge loopy belief propagation on the dense measurement graph.
//!
//! Every variable-to-factor message is summarized by its mean `mu[n][m]` and
//! variance `v[n][m]`. Factor `m` then sends `theta_n` a Gaussian with mean
//! `z[m][n] / A[m][n]` and variance `c[m][n] / A[m][n]^2`, where
//!
//! ```text
//! z[m][n] = y_m - sum_{q != n} A[m][q] mu[q][m]
//! c[m][n] = sigma^2 + sum_{q != n} A[m][q]^2 v[q][m]
//! ```
//!
//! The product of those Gaussians over all factors but `m` gives the leave-one-out
//! pseudo-data `xi[n][m]` with variance `1 / sum_{l != m} A[l][n]^2 / c[l][n]`,
//! which is combined with the coefficient prior by the scalar denoiser. Using all
//! factors instead gives the marginal estimates.
//!
//! Cost is `O(M N)` per sweep and memory `O(M N)`; this is a validation tool.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::denoiser::Priors;
use crate::error::{Error, Result};

/// Largest `M * N` accepted.
pub const MAX_EDGES: usize = 10_000;

#[derive(Debug, Clone)]
pub struct LbpOutput {
    /// Marginal posterior means.
    pub mean: Array1<f64>,
    /// Marginal posterior variances.
    pub variance: Array1<f64>,
    /// Extrinsic activity LLRs at the marginals.
    pub llr: Array1<f64>,
    /// `mu[n][m]`, variable-to-factor means (`N x M`).
    pub edge_mean: Array2<f64>,
    /// `v[n][m]`, variable-to-factor variances (`N x M`).
    pub edge_var: Array2<f64>,
    /// `z[m][n]` (`M x N`).
    pub edge_z: Array2<f64>,
    /// `c[m][n]` (`M x N`).
    pub edge_c: Array2<f64>,
    /// Leave-one-out pseudo-data `xi[n][m]` (`N x M`).
    pub edge_xi: Array2<f64>,
    /// Largest change of a marginal mean in the final sweep.
    pub last_change: f64,
}

/// Runs `iters` sweeps of per-edge message passing on `y = A theta + N(0, sigma2)`.
pub fn lbp_oracle(
    a: ArrayView2<f64>,
    y: ArrayView1<f64>,
    sigma2: f64,
    priors: &Priors,
    iters: usize,
) -> Result<LbpOutput> {
    let (m_len, n_len) = a.dim();
    if m_len * n_len > MAX_EDGES {
        return Err(Error::InvalidParameter(format!(
            "LBP oracle limited to {MAX_EDGES} edges, got {m_len}x{n_len}"
        )));
    }
    if y.len() != m_len || priors.len() != n_len {
        return Err(Error::DimensionMismatch {
            expected: m_len,
            actual: y.len(),
            context: "LBP oracle measurement/prior sizes",
        });
    }
    let floor = 1e-300;

    let mut edge_mean = Array2::<f64>::zeros((n_len, m_len));
    let mut edge_var = Array2::<f64>::zeros((n_len, m_len));
    for n in 0..n_len {
        let (mean, var) = priors.moments_at(n);
        edge_mean.row_mut(n).fill(mean);
        edge_var.row_mut(n).fill(var);
    }
    let mut edge_z = Array2::<f64>::zeros((m_len, n_len));
    let mut edge_c = Array2::<f64>::zeros((m_len, n_len));
    let mut edge_xi = Array2::<f64>::zeros((n_len, m_len));
    let mut mean = Array1::<f64>::zeros(n_len);
    let mut variance = Array1::<f64>::zeros(n_len);
    let mut llr = Array1::<f64>::zeros(n_len);
    let mut last_change = f64::INFINITY;

    for _ in 0..iters {
        // factor -> variable
        for m in 0..m_len {
            let mut full_mean = y[m];
            let mut full_var = sigma2;
            for q in 0..n_len {
                full_mean -= a[[m, q]] * edge_mean[[q, m]];
                full_var += a[[m, q]].powi(2) * edge_var[[q, m]];
            }
            for n in 0..n_len {
                edge_z[[m, n]] = full_mean + a[[m, n]] * edge_mean[[n, m]];
                edge_c[[m, n]] = (full_var - a[[m, n]].powi(2) * edge_var[[n, m]]).max(floor);
            }
        }

        // variable -> factor, with leave-one-out products of factor messages
        let mut loo_xi = Array1::<f64>::zeros(n_len * m_len);
        let mut loo_c = Array1::<f64>::zeros(n_len * m_len);
        let mut marg_xi = Array1::<f64>::zeros(n_len);
        let mut marg_c = Array1::<f64>::zeros(n_len);
        for n in 0..n_len {
            let mut prec = 0.0;
            let mut lin = 0.0;
            for l in 0..m_len {
                prec += a[[l, n]].powi(2) / edge_c[[l, n]];
                lin += a[[l, n]] * edge_z[[l, n]] / edge_c[[l, n]];
            }
            marg_xi[n] = lin / prec;
            marg_c[n] = 1.0 / prec;
            for m in 0..m_len {
                let p = prec - a[[m, n]].powi(2) / edge_c[[m, n]];
                let s = lin - a[[m, n]] * edge_z[[m, n]] / edge_c[[m, n]];
                let k = n * m_len + m;
                if p > 1e-12 * prec {
                    loo_xi[k] = s / p;
                    loo_c[k] = 1.0 / p;
                } else {
                    // no other factors: the message is the prior itself
                    loo_xi[k] = f64::NAN;
                }
            }
        }

        for n in 0..n_len {
            for m in 0..m_len {
                let k = n * m_len + m;
                if loo_xi[k].is_nan() {
                    let (pm, pv) = priors.moments_at(n);
                    edge_mean[[n, m]] = pm;
                    edge_var[[n, m]] = pv;
                    edge_xi[[n, m]] = 0.0;
                } else {
                    let o = priors.denoise_at(n, loo_xi[k], loo_c[k])?;
                    edge_mean[[n, m]] = o.mean;
                    edge_var[[n, m]] = o.variance;
                    edge_xi[[n, m]] = loo_xi[k];
                }
            }
        }

        last_change = 0.0;
        for n in 0..n_len {
            let o = priors.denoise_at(n, marg_xi[n], marg_c[n])?;
            last_change = last_change.max((o.mean - mean[n]).abs());
            mean[n] = o.mean;
            variance[n] = o.variance;
            llr[n] = o.llr;
        }
    }

    Ok(LbpOutput {
        mean,
        variance,
        llr,
        edge_mean,
        edge_var,
        edge_z,
        edge_c,
        edge_xi,
        last_change,
    })
}
