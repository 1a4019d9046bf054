//! First-order approximate message passing over a generic linear operator with
//! per-coefficient (non-identical) priors.
//!
//! One sweep, with `M` measurements:
//!
//! ```text
//! xi  = A^T z + mu
//! mu' = F(xi; c),  v' = G(xi; c)
//! z'  = y - A mu' + (z / M) sum_n F'(xi_n; c)
//! c'  = sigma^2 + (1 / M) sum_n v'_n
//! ```
//!
//! The per-edge loopy BP recursion that AMP approximates is available as
//! [`lbp::lbp_oracle`] for validation on small dense systems.

pub mod lbp;

use ndarray::{Array1, ArrayView1};

use crate::denoiser::{denoise_batch, Priors};
use crate::error::{Error, Result};
use crate::measurement::LinearOperator;

/// Iterate of the AMP recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    /// Posterior means.
    pub mu: Array1<f64>,
    /// Posterior variances.
    pub v: Array1<f64>,
    /// Onsager-corrected residual.
    pub z: Array1<f64>,
    /// Effective noise variance for the next denoising step.
    pub c: f64,
    /// Pseudo-data fed to the last denoising step.
    pub xi: Array1<f64>,
    /// Extrinsic activity LLRs from the last denoising step.
    pub llr: Array1<f64>,
    /// Iterations performed by the run that produced this state.
    pub iter: usize,
}

impl AmpState {
    /// Cold start: `z = y`, `mu = 0`, `c = c_init`.
    pub fn cold(y: ArrayView1<f64>, n: usize, c_init: f64) -> Self {
        Self {
            mu: Array1::zeros(n),
            v: Array1::zeros(n),
            z: y.to_owned(),
            c: c_init,
            xi: Array1::zeros(n),
            llr: Array1::zeros(n),
            iter: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub max_iter: usize,
    /// Stop once `||mu^i - mu^{i-1}||_2` falls below this.
    pub tol: f64,
    /// Cold-start `c` as a multiple of the largest prior variance.
    pub c_init_factor: f64,
    /// Lower bound on `c` (matters only when `sigma^2 = 0`).
    pub c_floor: f64,
    /// Abort when `||z||` grows by more than this factor in one iteration.
    pub divergence_factor: f64,
    /// Include the Onsager correction; disabling it gives plain iterative thresholding.
    pub onsager: bool,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            max_iter: 10,
            tol: 1e-5,
            c_init_factor: 100.0,
            c_floor: 1e-12,
            divergence_factor: 10.0,
            onsager: true,
        }
    }
}

fn norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

fn check_finite(x: &Array1<f64>, what: &'static str, iter: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, iter })
    }
}

/// One AMP sweep.
pub fn amp_step<A: LinearOperator + ?Sized>(
    state: &AmpState,
    a: &A,
    y: ArrayView1<f64>,
    sigma2: f64,
    priors: &Priors,
    cfg: &AmpConfig,
) -> Result<AmpState> {
    let (m, n) = (a.rows(), a.cols());
    for (expected, actual, context) in [
        (m, y.len(), "measurement length"),
        (m, state.z.len(), "AMP residual length"),
        (n, state.mu.len(), "AMP mean length"),
        (n, priors.len(), "prior count"),
    ] {
        if expected != actual {
            return Err(Error::DimensionMismatch {
                expected,
                actual,
                context,
            });
        }
    }
    let iter = state.iter + 1;

    let xi = a.apply_adjoint(state.z.view()) + &state.mu;
    check_finite(&xi, "pseudo-data", iter)?;
    let out = denoise_batch(xi.view(), state.c, priors)?;
    check_finite(&out.mean, "posterior mean", iter)?;

    let mut z = &y - &a.apply(out.mean.view());
    if cfg.onsager {
        let onsager = out.deriv.sum() / m as f64;
        z.scaled_add(onsager, &state.z);
    }
    check_finite(&z, "residual", iter)?;
    let c = (sigma2 + out.variance.sum() / m as f64).max(cfg.c_floor);
    if !c.is_finite() {
        return Err(Error::NonFinite {
            what: "effective noise variance",
            iter,
        });
    }
    Ok(AmpState {
        mu: out.mean,
        v: out.variance,
        z,
        c,
        xi,
        llr: out.llr,
        iter,
    })
}

/// Runs AMP to tolerance or `max_iter`, cold-started unless `warm` is given.
pub fn amp_run<A: LinearOperator + ?Sized>(
    a: &A,
    y: ArrayView1<f64>,
    sigma2: f64,
    priors: &Priors,
    cfg: &AmpConfig,
    warm: Option<&AmpState>,
) -> Result<AmpState> {
    if cfg.max_iter == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter(
            "AMP needs max_iter >= 1 and tol > 0".into(),
        ));
    }
    let mut state = match warm {
        Some(w) => AmpState {
            iter: 0,
            ..w.clone()
        },
        None => {
            let c0 = (cfg.c_init_factor * priors.max_variance()).max(cfg.c_floor);
            AmpState::cold(y, a.cols(), c0)
        }
    };
    for _ in 0..cfg.max_iter {
        let next = amp_step(&state, a, y, sigma2, priors, cfg)?;
        let z_prev = norm(state.z.view());
        let z_next = norm(next.z.view());
        if z_prev > 0.0 && z_next > cfg.divergence_factor * z_prev {
            return Err(Error::AmpDiverged {
                iter: next.iter,
                ratio: z_next / z_prev,
                last_state: Box::new(state),
            });
        }
        let delta = norm((&next.mu - &state.mu).view());
        state = next;
        if delta < cfg.tol {
            break;
        }
    }
    Ok(state)
}
