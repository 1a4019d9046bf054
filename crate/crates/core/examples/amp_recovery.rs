//! AMP recovery of a sparse Bernoulli-Gaussian vector from Gaussian measurements.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use turbo_amp::amp::{amp_run, AmpConfig};
use turbo_amp::denoiser::Priors;
use turbo_amp::measurement::{DenseOperator, MeasurementOperator};
use turbo_amp::signals::bernoulli_gaussian;

fn main() -> turbo_amp::Result<()> {
    let (m, n, k, sigma2) = (512, 1024, 50, 1e-6_f64);
    let a = MeasurementOperator::gaussian(m, n, 7)?.matrix().to_owned();
    let theta = bernoulli_gaussian(n, k, 1.0, 8);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let w = Array1::from_shape_fn(m, |_| sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal));
    let y = a.dot(&theta) + w;

    let priors = Priors::bernoulli_gaussian(vec![k as f64 / n as f64; n], vec![1.0; n])?;
    let op = DenseOperator(a);
    let energy = theta.dot(&theta);
    for iters in [1, 2, 5, 10, 20, 50] {
        let cfg = AmpConfig { max_iter: iters, tol: 1e-10, ..AmpConfig::default() };
        let st = amp_run(&op, y.view(), sigma2, &priors, &cfg, None)?;
        let e = &theta - &st.mu;
        println!("{:3} iterations: NMSE {:7.2} dB, c = {:.3e}", st.iter, 10.0 * (e.dot(&e) / energy).log10(), st.c);
    }
    Ok(())
}
