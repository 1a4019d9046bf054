//! Benchmarks every method on the bundled test images and prints the table.
//!
//! `cargo run --release --example benchmark -- [m]`

use std::path::PathBuf;

use turbo_amp::cli::{cmd_benchmark, ExperimentSpec, Method};
use turbo_amp::denoiser::SignalModel;

fn main() -> turbo_amp::Result<()> {
    let m: usize = std::env::args().nth(1).map_or(5000, |s| s.parse().expect("m"));
    let out = std::env::temp_dir().join("turbo-amp-benchmark");
    let mut spec = ExperimentSpec::new(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"), m);
    spec.methods = vec![
        Method::Turbo(SignalModel::BernoulliGaussian),
        Method::Turbo(SignalModel::GaussianMixture),
        Method::FlatBg,
    ];
    spec.out = out.clone();
    let rows = cmd_benchmark(&spec)?;
    println!("{:>14} {:>7} {:>9} {:>6} {:>6} {:>8}", "image", "model", "NMSE dB", "turbo", "amp", "time s");
    for r in &rows {
        println!(
            "{:>14} {:>7} {:>9} {:>6} {:>6} {:>8}",
            r.image_id, r.model, r.nmse_db, r.turbo_iters, r.total_amp_iters, r.wall_time_s
        );
    }
    println!("written to {}", out.join("benchmark.csv").display());
    Ok(())
}
