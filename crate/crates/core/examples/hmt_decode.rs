//! Exact sum-product on a small wavelet forest: how the tree prior reshapes
//! noisy activity evidence.

use turbo_amp::hmt::{hmt_decode, pmf_to_llr, HmtParams, StateMessages};
use turbo_amp::wavelet::build_tree_index;

fn main() -> turbo_amp::Result<()> {
    let tree = build_tree_index(8, 3)?;
    let params = HmtParams {
        pi_root: 0.2,
        pi_approx: 0.99,
        pi11: vec![0.8, 0.7],
        pi00: vec![0.95, 0.95],
    };
    // weak evidence everywhere, strong "active" evidence along one chain
    let root = tree.roots()[0];
    let child = tree.children(root)[2];
    let grandchild = tree.children(child)[1];
    let llr: Vec<f64> = (0..tree.n_total())
        .map(|n| if n == root || n == grandchild { 4.0 } else { -0.5 })
        .collect();
    let out = hmt_decode(&tree, &params, &StateMessages::from_llr(&llr)?)?;
    let ext = pmf_to_llr(&out.h_out);
    let post = pmf_to_llr(&out.posterior);
    for (name, n) in [("root", root), ("child", child), ("grandchild", grandchild), ("other root", tree.roots()[1])] {
        println!("{name:>10}: evidence {:5.2}  tree-extrinsic {:6.3}  posterior {:6.3}", llr[n], ext[n], post[n]);
    }
    Ok(())
}
