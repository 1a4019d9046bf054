//! Scalar MMSE denoisers under the Bernoulli-Gaussian and Gaussian-mixture priors.

use turbo_amp::denoiser::{bg_denoise, gm_denoise, BgPrior, GmPrior};

fn main() -> turbo_amp::Result<()> {
    let c = 0.1;
    let bg = BgPrior::new(0.1, 4.0)?;
    let gm = GmPrior::new(0.1, 4.0, 0.01)?;
    println!("c = {c}; BG(lambda 0.1, var 4); GM(lambda 0.1, 4, 0.01)");
    println!("{:>6} | {:>8} {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}", "xi", "F_bg", "G_bg", "F'_bg", "llr_bg", "F_gm", "G_gm", "llr_gm");
    for k in -8..=8 {
        let xi = k as f64 * 0.25;
        let b = bg_denoise(xi, c, &bg)?;
        let g = gm_denoise(xi, c, &gm)?;
        println!(
            "{xi:6.2} | {:8.4} {:8.4} {:8.4} {:8.3} | {:8.4} {:8.4} {:8.3}",
            b.mean, b.variance, b.deriv, b.llr, g.mean, g.variance, g.llr
        );
    }
    Ok(())
}
