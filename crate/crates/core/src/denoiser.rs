//! Scalar MMSE denoisers for `xi = theta + N(0, c)`.
//!
//! Two coefficient priors are supported:
//!
//! * Bernoulli-Gaussian: `lambda N(0, var_on) + (1 - lambda) delta_0`;
//! * two-state Gaussian mixture: `lambda N(0, var_large) + (1 - lambda) N(0, var_small)`.
//!
//! Each evaluation returns the posterior mean `F`, posterior variance `G`, the
//! derivative `F'` with respect to `xi`, and the extrinsic log-likelihood ratio
//! `L = ln p(xi | s = 1) / p(xi | s = 0)` of the activity state.
//!
//! Internally the activity posterior is formed as `sigmoid(L + logit lambda)`,
//! which is `1 / (1 + tau)` for the usual `tau = beta exp(-zeta xi^2)` but never
//! exponentiates a large argument. With `pi` that posterior and `alpha` the Wiener
//! gain of the active component,
//!
//! ```text
//! F  = alpha xi pi
//! G  = pi alpha c + pi (1 - pi) alpha^2 xi^2       (= c F')
//! F' = alpha (pi + 2 zeta xi^2 pi (1 - pi))
//! ```
//!
//! and analogously for the mixture. `G` is written without the `c F / xi` term so
//! that `xi = 0` needs no special case.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Activity probabilities are clamped to `[LAMBDA_MIN, 1 - LAMBDA_MIN]`.
pub const LAMBDA_MIN: f64 = 1e-12;

pub fn clamp_lambda(lambda: f64) -> f64 {
    lambda.clamp(LAMBDA_MIN, 1.0 - LAMBDA_MIN)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgPrior {
    lambda: f64,
    var_on: f64,
}

impl BgPrior {
    pub fn new(lambda: f64, var_on: f64) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("activity probability {lambda}")));
        }
        if !(var_on > 0.0 && var_on.is_finite()) {
            return Err(Error::InvalidParameter(format!("active variance {var_on}")));
        }
        Ok(Self {
            lambda: clamp_lambda(lambda),
            var_on,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn var_on(&self) -> f64 {
        self.var_on
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmPrior {
    lambda: f64,
    var_large: f64,
    var_small: f64,
}

impl GmPrior {
    /// Requires `var_large >= var_small >= 0`.
    pub fn new(lambda: f64, var_large: f64, var_small: f64) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("activity probability {lambda}")));
        }
        if !(var_small >= 0.0 && var_large >= var_small && var_large.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mixture variances large={var_large}, small={var_small}"
            )));
        }
        Ok(Self {
            lambda: clamp_lambda(lambda),
            var_large,
            var_small,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn var_large(&self) -> f64 {
        self.var_large
    }

    pub fn var_small(&self) -> f64 {
        self.var_small
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserOutput {
    pub mean: f64,
    pub variance: f64,
    pub deriv: f64,
    pub llr: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

#[inline]
fn bg_eval(xi: f64, c: f64, lambda: f64, var_on: f64) -> DenoiserOutput {
    let alpha = var_on / (var_on + c);
    let zeta = alpha / (2.0 * c);
    let xi2 = xi * xi;
    let llr = zeta * xi2 - 0.5 * (var_on / c).ln_1p();
    let t = llr + logit(lambda);
    let on = sigmoid(t);
    let both = on * sigmoid(-t);
    DenoiserOutput {
        mean: alpha * xi * on,
        variance: on * alpha * c + both * alpha * alpha * xi2,
        deriv: alpha * (on + 2.0 * zeta * xi2 * both),
        llr,
    }
}

#[inline]
fn gm_eval(xi: f64, c: f64, lambda: f64, var_large: f64, var_small: f64) -> DenoiserOutput {
    let cl = c + var_large;
    let cs = c + var_small;
    let alpha_l = var_large / cl;
    let alpha_s = var_small / cs;
    let zeta = (var_large - var_small) / (2.0 * cl * cs);
    let xi2 = xi * xi;
    let llr = zeta * xi2 - 0.5 * (cl / cs).ln();
    let t = llr + logit(lambda);
    let on = sigmoid(t);
    let off = sigmoid(-t);
    let both = on * off;
    let gain = on * alpha_l + off * alpha_s;
    let spread = alpha_l - alpha_s;
    DenoiserOutput {
        mean: gain * xi,
        variance: c * gain + both * spread * spread * xi2,
        deriv: gain + 2.0 * zeta * xi2 * spread * both,
        llr,
    }
}

/// Bernoulli-Gaussian posterior moments, derivative and extrinsic LLR.
pub fn bg_denoise(xi: f64, c: f64, prior: &BgPrior) -> Result<DenoiserOutput> {
    if !xi.is_finite() {
        return Err(Error::InvalidParameter(format!("pseudo-data {xi}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("effective noise variance {c}")));
    }
    Ok(bg_eval(xi, c, prior.lambda, prior.var_on))
}

/// Gaussian-mixture posterior moments, derivative and extrinsic LLR.
pub fn gm_denoise(xi: f64, c: f64, prior: &GmPrior) -> Result<DenoiserOutput> {
    if !xi.is_finite() {
        return Err(Error::InvalidParameter(format!("pseudo-data {xi}")));
    }
    if !(c >= 0.0 && c.is_finite()) || c + prior.var_small <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "effective noise variance {c} with small-component variance {}",
            prior.var_small
        )));
    }
    Ok(gm_eval(xi, c, prior.lambda, prior.var_large, prior.var_small))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalModel {
    BernoulliGaussian,
    GaussianMixture,
}

/// Per-coefficient priors for a whole coefficient vector.
///
/// `var_large` is the active (slab) variance; `var_small` is only read for the
/// Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    model: SignalModel,
    lambda: Vec<f64>,
    var_large: Vec<f64>,
    var_small: Vec<f64>,
}

impl Priors {
    pub fn bernoulli_gaussian(lambda: Vec<f64>, var_on: Vec<f64>) -> Result<Self> {
        if lambda.len() != var_on.len() {
            return Err(Error::DimensionMismatch {
                expected: lambda.len(),
                actual: var_on.len(),
                context: "prior variance count",
            });
        }
        for (&l, &v) in lambda.iter().zip(&var_on) {
            BgPrior::new(l, v)?;
        }
        Ok(Self {
            model: SignalModel::BernoulliGaussian,
            lambda: lambda.into_iter().map(clamp_lambda).collect(),
            var_large: var_on,
            var_small: Vec::new(),
        })
    }

    pub fn gaussian_mixture(
        lambda: Vec<f64>,
        var_large: Vec<f64>,
        var_small: Vec<f64>,
    ) -> Result<Self> {
        for len in [var_large.len(), var_small.len()] {
            if len != lambda.len() {
                return Err(Error::DimensionMismatch {
                    expected: lambda.len(),
                    actual: len,
                    context: "prior variance count",
                });
            }
        }
        for ((&l, &vl), &vs) in lambda.iter().zip(&var_large).zip(&var_small) {
            GmPrior::new(l, vl, vs)?;
        }
        Ok(Self {
            model: SignalModel::GaussianMixture,
            lambda: lambda.into_iter().map(clamp_lambda).collect(),
            var_large,
            var_small,
        })
    }

    pub fn model(&self) -> SignalModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn var_large(&self) -> &[f64] {
        &self.var_large
    }

    pub fn var_small(&self) -> &[f64] {
        &self.var_small
    }

    /// Replaces the activity probabilities, clamping into the valid range.
    pub fn set_lambda(&mut self, lambda: &[f64]) {
        assert_eq!(lambda.len(), self.lambda.len());
        for (dst, &src) in self.lambda.iter_mut().zip(lambda) {
            *dst = clamp_lambda(src);
        }
    }

    pub fn set_var_large(&mut self, var: &[f64]) {
        assert_eq!(var.len(), self.var_large.len());
        self.var_large.copy_from_slice(var);
    }

    pub fn set_var_small(&mut self, var: &[f64]) {
        assert_eq!(var.len(), self.var_small.len());
        self.var_small.copy_from_slice(var);
    }

    /// Largest active-component variance.
    pub fn max_variance(&self) -> f64 {
        self.var_large.iter().copied().fold(0.0, f64::max)
    }

    /// Checked scalar evaluation of coefficient `n`'s denoiser.
    pub fn denoise_at(&self, n: usize, xi: f64, c: f64) -> Result<DenoiserOutput> {
        match self.model {
            SignalModel::BernoulliGaussian => bg_denoise(
                xi,
                c,
                &BgPrior {
                    lambda: self.lambda[n],
                    var_on: self.var_large[n],
                },
            ),
            SignalModel::GaussianMixture => gm_denoise(
                xi,
                c,
                &GmPrior {
                    lambda: self.lambda[n],
                    var_large: self.var_large[n],
                    var_small: self.var_small[n],
                },
            ),
        }
    }

    /// Prior mean and variance of coefficient `n` (the mean is always zero).
    pub fn moments_at(&self, n: usize) -> (f64, f64) {
        let l = self.lambda[n];
        let var = match self.model {
            SignalModel::BernoulliGaussian => l * self.var_large[n],
            SignalModel::GaussianMixture => l * self.var_large[n] + (1.0 - l) * self.var_small[n],
        };
        (0.0, var)
    }

    #[inline]
    fn eval(&self, n: usize, xi: f64, c: f64) -> DenoiserOutput {
        match self.model {
            SignalModel::BernoulliGaussian => bg_eval(xi, c, self.lambda[n], self.var_large[n]),
            SignalModel::GaussianMixture => {
                gm_eval(xi, c, self.lambda[n], self.var_large[n], self.var_small[n])
            }
        }
    }
}

/// Vectorized denoiser outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisedBatch {
    pub mean: Array1<f64>,
    pub variance: Array1<f64>,
    pub deriv: Array1<f64>,
    pub llr: Array1<f64>,
}

impl DenoisedBatch {
    pub fn get(&self, n: usize) -> DenoiserOutput {
        DenoiserOutput {
            mean: self.mean[n],
            variance: self.variance[n],
            deriv: self.deriv[n],
            llr: self.llr[n],
        }
    }
}

/// Applies the per-coefficient denoiser to every entry of `xi` at a shared `c`.
pub fn denoise_batch(xi: ArrayView1<f64>, c: f64, priors: &Priors) -> Result<DenoisedBatch> {
    if xi.len() != priors.len() {
        return Err(Error::DimensionMismatch {
            expected: priors.len(),
            actual: xi.len(),
            context: "denoise_batch pseudo-data length",
        });
    }
    let c_ok = match priors.model {
        SignalModel::BernoulliGaussian => c > 0.0,
        SignalModel::GaussianMixture => {
            c > 0.0 || (c == 0.0 && priors.var_small.iter().all(|&v| v > 0.0))
        }
    };
    if !c_ok || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("effective noise variance {c}")));
    }
    let n = xi.len();
    let mut out = DenoisedBatch {
        mean: Array1::zeros(n),
        variance: Array1::zeros(n),
        deriv: Array1::zeros(n),
        llr: Array1::zeros(n),
    };
    for (k, &x) in xi.iter().enumerate() {
        let o = priors.eval(k, x, c);
        out.mean[k] = o.mean;
        out.variance[k] = o.variance;
        out.deriv[k] = o.deriv;
        out.llr[k] = o.llr;
    }
    Ok(out)
}
