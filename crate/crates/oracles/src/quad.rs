//! Adaptive Gauss-Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate, error estimate and the integral of `|f|`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut k_abs = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = h * XGK[i];
        let (lo, hi) = (f(c - dx), f(c + dx));
        k += WGK[i] * (lo + hi);
        k_abs += WGK[i] * (lo.abs() + hi.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * (lo + hi);
        }
    }
    (k * h, (k - g).abs() * h, k_abs * h.abs())
}

/// Integrates `f` over `[a, b]` to roughly `abs_tol + rel_tol*|I|`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let (whole, _, _) = gk15(&f, a, b);
    let target = abs_tol.max(rel_tol * whole.abs());
    recurse(&f, a, b, target, 0)
}

fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (v, err, v_abs) = gk15(f, a, b);
    // below ~50 ulps of the panel the error estimate is roundoff
    if err <= tol || err <= 50.0 * f64::EPSILON * v_abs || depth > 40 {
        return v;
    }
    let m = 0.5 * (a + b);
    recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
}

/// Integrates `exp(log_f(u))` and `g(u) exp(log_f(u))` over the real line,
/// locating the mass by stepping out from a coarse peak search. Returns the
/// ratio `∫ g e^{log_f} / ∫ e^{log_f}`.
pub fn expectation_over_line(
    log_f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    search_lo: f64,
    search_hi: f64,
) -> f64 {
    // coarse grid for the peak
    let steps = 4000;
    let mut best = (search_lo, f64::NEG_INFINITY);
    for i in 0..=steps {
        let u = search_lo + (search_hi - search_lo) * i as f64 / steps as f64;
        let v = log_f(u);
        if v > best.1 {
            best = (u, v);
        }
    }
    let (peak, top) = best;
    let mut lo = peak - 0.5;
    while log_f(lo) > top - 80.0 {
        lo -= 0.5;
    }
    let mut hi = peak + 0.5;
    while log_f(hi) > top - 80.0 {
        hi += 0.5;
    }
    let w = |u: f64| (log_f(u) - top).exp();
    // split at the peak so each half is unimodal
    let z = integrate(w, lo, peak, 0.0, 1e-14) + integrate(w, peak, hi, 0.0, 1e-14);
    let m = integrate(|u| g(u) * w(u), lo, peak, 0.0, 1e-14)
        + integrate(|u| g(u) * w(u), peak, hi, 0.0, 1e-14);
    m / z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_gaussian() {
        let v = integrate(|x| x * x, 0.0, 3.0, 0.0, 1e-14);
        assert!((v - 9.0).abs() < 1e-12);
        let g = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -40.0,
            40.0,
            0.0,
            1e-14,
        );
        assert!((g - 1.0).abs() < 1e-12);
    }
}
