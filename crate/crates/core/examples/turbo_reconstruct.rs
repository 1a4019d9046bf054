//! Turbo-BG and Turbo-GM against flat-prior BG-AMP on a natural test image.
//!
//! `cargo run --release --example turbo_reconstruct -- [image.pgm] [m]`

use std::path::PathBuf;

use turbo_amp::cli::pgm::load_image;
use turbo_amp::denoiser::SignalModel;
use turbo_amp::measurement::MeasurementOperator;
use turbo_amp::turbo::{reconstruct, reconstruct_flat_bg, TurboConfig};
use turbo_amp::wavelet::build_tree_index;

fn main() -> turbo_amp::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/cameraman_128.pgm"));
    let m: usize = args.next().map_or(5000, |s| s.parse().expect("m"));

    let image = load_image(&path, true)?;
    let tree = build_tree_index(image.nrows(), 4)?;
    let op = MeasurementOperator::gaussian(m, image.len(), 0)?;
    let obs = op.measure(image.view(), 0.0, 0)?;
    println!("{} ({}x{}), M = {m}", path.display(), image.nrows(), image.ncols());

    for model in [SignalModel::BernoulliGaussian, SignalModel::GaussianMixture] {
        let cfg = TurboConfig { model, signal_scale: 255.0, ..TurboConfig::default() };
        let rep = reconstruct(&obs, &op, &tree, &cfg, Some(image.view()))?;
        println!("{model:?}: {:.2} dB after {} rounds ({:.1} s)", rep.nmse_db.unwrap(), rep.turbo_iters, rep.wall_time_s);
        for r in &rep.trace {
            println!(
                "  round {:2}: {:2} AMP iterations, NMSE {:7.2} dB, pi_root {:.3}",
                r.round,
                r.amp_iters,
                r.nmse_db.unwrap(),
                r.params.hmt.pi_root
            );
        }
    }
    let cfg = TurboConfig { signal_scale: 255.0, ..TurboConfig::default() };
    let flat = reconstruct_flat_bg(&obs, &op, &tree, &cfg, Some(image.view()))?;
    println!("flat BG-AMP: {:.2} dB", flat.nmse_db.unwrap());
    Ok(())
}
