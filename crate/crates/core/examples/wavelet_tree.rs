//! Haar analysis of a synthetic image and a walk down its coefficient quad-tree.

use ndarray::Array2;
use turbo_amp::wavelet::{build_tree_index, forward_dwt2, inverse_dwt2};

fn main() -> turbo_amp::Result<()> {
    let side = 32;
    let image = Array2::from_shape_fn((side, side), |(r, c)| {
        let d = ((r as f64 - 12.0).powi(2) + (c as f64 - 18.0).powi(2)).sqrt();
        if d < 8.0 { 200.0 } else { 40.0 }
    });
    let theta = forward_dwt2(image.view(), 4)?;
    let back = inverse_dwt2(theta.view(), 4)?;
    let err = (&back - &image).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("{} coefficients, round-trip error {err:.2e}", theta.len());

    let tree = build_tree_index(side, 4)?;
    println!("approximation band: {} coefficients, {} tree roots", tree.approx_set().len(), tree.roots().len());
    for j in 0..tree.depth() {
        let set = tree.level_set(j);
        let large = set.iter().filter(|&&n| theta[n].abs() > 1.0).count();
        println!("level {j}: {:4} coefficients, {:3} with |theta| > 1", set.len(), large);
    }

    // follow the largest root down its strongest child at each level
    let mut node = *tree
        .roots()
        .iter()
        .max_by(|a, b| theta[**a].abs().total_cmp(&theta[**b].abs()))
        .expect("roots");
    loop {
        println!("node {node:4} level {:?} theta {:9.3}", tree.level(node), theta[node]);
        match tree.children(node).iter().max_by(|a, b| theta[**a].abs().total_cmp(&theta[**b].abs())) {
            Some(&k) => node = k,
            None => break,
        }
    }
    Ok(())
}
