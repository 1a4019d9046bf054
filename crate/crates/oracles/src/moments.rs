//! Posterior moments of `theta` given `xi = theta + N(0, c)` by direct
//! numerical integration of prior times likelihood.

use crate::quad::integrate;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
}

/// Posterior mean and variance under a spike at zero (weight `1-lambda`) and a
/// zero-mean Gaussian slab of variance `var_on` (weight `lambda`).
pub fn spike_slab(xi: f64, c: f64, lambda: f64, var_on: f64) -> (f64, f64) {
    let log_spike = (1.0 - lambda).ln() + log_normal(xi, 0.0, c);
    let slab = |t: f64| lambda.ln() + log_normal(t, 0.0, var_on) + log_normal(xi, t, c);
    mixture_moments(xi, c, Some(log_spike), &[&slab], &[var_on])
}

/// Posterior mean and variance under a two-component zero-mean Gaussian mixture.
pub fn two_gaussian(xi: f64, c: f64, lambda: f64, var_large: f64, var_small: f64) -> (f64, f64) {
    let large = move |t: f64| lambda.ln() + log_normal(t, 0.0, var_large) + log_normal(xi, t, c);
    let small =
        move |t: f64| (1.0 - lambda).ln() + log_normal(t, 0.0, var_small) + log_normal(xi, t, c);
    mixture_moments(xi, c, None, &[&large, &small], &[var_large, var_small])
}

/// Integrates each continuous component over a window wide enough to hold its
/// posterior mass; the optional spike contributes a point mass at zero.
fn mixture_moments(
    xi: f64,
    c: f64,
    log_spike: Option<f64>,
    comps: &[&dyn Fn(f64) -> f64],
    vars: &[f64],
) -> (f64, f64) {
    // windows from the conjugate posterior of each component (only used to place the grid)
    let windows: Vec<(f64, f64, f64)> = vars
        .iter()
        .map(|&v| {
            let centre = v / (v + c) * xi;
            let sd = (v * c / (v + c)).sqrt();
            (centre - 40.0 * sd, centre + 40.0 * sd, centre)
        })
        .collect();
    let mut top = log_spike.unwrap_or(f64::NEG_INFINITY);
    for (f, w) in comps.iter().zip(&windows) {
        top = top.max(f(w.2));
    }
    let integ = |f: &&dyn Fn(f64) -> f64, w: &(f64, f64, f64), g: &dyn Fn(f64) -> f64| {
        let h = |t: f64| g(t) * (f(t) - top).exp();
        integrate(h, w.0, w.2, 0.0, 1e-14) + integrate(h, w.2, w.1, 0.0, 1e-14)
    };
    let spike = log_spike.map(|l| (l - top).exp()).unwrap_or(0.0);
    let mut z = spike;
    let mut m1 = 0.0;
    for (f, w) in comps.iter().zip(&windows) {
        z += integ(f, w, &|_| 1.0);
        m1 += integ(f, w, &|t| t);
    }
    let mean = m1 / z;
    let mut m2 = spike * mean * mean;
    for (f, w) in comps.iter().zip(&windows) {
        m2 += integ(f, w, &|t| (t - mean) * (t - mean));
    }
    (mean, m2 / z)
}
