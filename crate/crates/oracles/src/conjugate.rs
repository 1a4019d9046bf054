//! Posterior means of Gamma-distributed precisions and Beta-distributed
//! probabilities, computed by integrating prior times likelihood.

use crate::quad::expectation_over_line;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `E[rho | samples]` for `rho ~ Gamma(shape, rate)` and i.i.d. samples
/// `x_i ~ N(0, 1/rho)`.
pub fn gamma_precision_mean(shape: f64, rate: f64, samples: &[f64]) -> f64 {
    // integrate over u = ln rho; the Jacobian e^u is folded into the log density
    let log_f = |u: f64| {
        let rho = u.exp();
        let mut l = (shape - 1.0) * u - rate * rho + u;
        for &x in samples {
            l += 0.5 * u - 0.5 * LN_2PI - 0.5 * rho * x * x;
        }
        l
    };
    expectation_over_line(log_f, |u| u.exp(), -60.0, 60.0)
}

/// `E[p | outcomes]` for `p ~ Beta(c, d)` and Bernoulli outcomes.
pub fn beta_mean(c: f64, d: f64, outcomes: &[bool]) -> f64 {
    // u = logit p; dp = p (1 - p) du
    let log_f = |u: f64| {
        let lp = -softplus(-u);
        let lq = -softplus(u);
        let mut l = (c - 1.0) * lp + (d - 1.0) * lq + lp + lq;
        for &o in outcomes {
            l += if o { lp } else { lq };
        }
        l
    };
    expectation_over_line(log_f, |u| 1.0 / (1.0 + (-u).exp()), -60.0, 60.0)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let m = gamma_precision_mean(2.0, 3.0, &[]);
        assert!((m - 2.0 / 3.0).abs() < 1e-10);
        let p = beta_mean(2.0, 5.0, &[true, true, false]);
        assert!((p - 4.0 / 10.0).abs() < 1e-10);
    }
}
