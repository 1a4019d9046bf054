//! Orthonormal 2D Haar analysis/synthesis and the wavelet quad-tree index.
//!
//! Coefficient vectors use a level-major layout:
//!
//! * level `-1` (approximation) first, then wavelet levels `0..J-1`, coarse to fine;
//! * within a wavelet level, three subbands in the order
//!   [`Subband::HighLow`], [`Subband::LowHigh`], [`Subband::HighHigh`];
//! * within a subband, row-major.
//!
//! For a `d x d` image with `J` levels the approximation block is `d/2^J` on a side and
//! wavelet level `j` has subbands of side `d/2^(J-j)`. Each coefficient at level `j`
//! parents the 2x2 block at the same subband position one level finer.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Detail subband of a 2D Haar level, named by (horizontal, vertical) filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subband {
    /// Horizontal high-pass, vertical low-pass (top-right block of the Mallat layout).
    HighLow = 0,
    /// Horizontal low-pass, vertical high-pass (bottom-left block).
    LowHigh = 1,
    /// High-pass in both directions (bottom-right block).
    HighHigh = 2,
}

impl Subband {
    pub const ALL: [Subband; 3] = [Subband::HighLow, Subband::LowHigh, Subband::HighHigh];

    /// Block offset (row, col) in units of the subband side.
    fn block_offset(self) -> (usize, usize) {
        match self {
            Subband::HighLow => (0, 1),
            Subband::LowHigh => (1, 0),
            Subband::HighHigh => (1, 1),
        }
    }
}

/// Geometry of a `side x side` Haar decomposition with `levels` scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Haar2d {
    side: usize,
    levels: usize,
}

impl Haar2d {
    pub fn new(side: usize, levels: usize) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::InvalidGeometry(format!(
                "image side {side} is not a power of two"
            )));
        }
        if levels == 0 {
            return Err(Error::InvalidGeometry("at least one level is required".into()));
        }
        if levels > side.trailing_zeros() as usize {
            return Err(Error::InvalidGeometry(format!(
                "{levels} levels need a side of at least {}, got {side}",
                1usize << levels.min(63)
            )));
        }
        Ok(Self { side, levels })
    }

    /// Geometry for a flat coefficient vector of length `n`.
    pub fn from_len(n: usize, levels: usize) -> Result<Self> {
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n {
            return Err(Error::InvalidGeometry(format!(
                "{n} coefficients do not form a square image"
            )));
        }
        Self::new(side, levels)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Total number of coefficients `N = side^2`.
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Side of the approximation block.
    pub fn approx_side(&self) -> usize {
        self.side >> self.levels
    }

    /// Side of each subband at wavelet level `j` (0 = coarsest).
    pub fn subband_side(&self, level: usize) -> usize {
        self.approx_side() << level
    }

    /// Offset of wavelet level `j` in the coefficient vector.
    pub fn level_offset(&self, level: usize) -> usize {
        let a = self.approx_side();
        a * a + (0..level).map(|i| 3 * self.subband_side(i).pow(2)).sum::<usize>()
    }

    /// Flat index of the wavelet coefficient at (`level`, `band`, `row`, `col`).
    pub fn index(&self, level: usize, band: Subband, row: usize, col: usize) -> usize {
        let s = self.subband_side(level);
        self.level_offset(level) + band as usize * s * s + row * s + col
    }

    pub fn forward(&self, image: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_image(image)?;
        let d = self.side;
        let mut buf: Vec<f64> = image.iter().copied().collect();
        let mut scratch = vec![0.0; d];
        let mut size = d;
        for _ in 0..self.levels {
            analysis_pass(&mut buf, d, size, &mut scratch);
            size /= 2;
        }
        Ok(self.gather(&buf))
    }

    pub fn inverse(&self, coeffs: ArrayView1<f64>) -> Result<Array2<f64>> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: coeffs.len(),
                context: "inverse_dwt2 coefficient count",
            });
        }
        let d = self.side;
        let mut buf = self.scatter(coeffs);
        let mut scratch = vec![0.0; d];
        let mut size = self.approx_side() * 2;
        for _ in 0..self.levels {
            synthesis_pass(&mut buf, d, size, &mut scratch);
            size *= 2;
        }
        Ok(Array2::from_shape_vec((d, d), buf).expect("buffer is d*d"))
    }

    fn check_image(&self, image: ArrayView2<f64>) -> Result<()> {
        let (r, c) = image.dim();
        if r != self.side || c != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                actual: if r != self.side { r } else { c },
                context: "forward_dwt2 image side",
            });
        }
        Ok(())
    }

    /// Mallat in-place layout -> level-major vector.
    fn gather(&self, buf: &[f64]) -> Array1<f64> {
        let d = self.side;
        let mut out = Vec::with_capacity(self.len());
        let a = self.approx_side();
        for r in 0..a {
            out.extend_from_slice(&buf[r * d..r * d + a]);
        }
        for level in 0..self.levels {
            let s = self.subband_side(level);
            for band in Subband::ALL {
                let (br, bc) = band.block_offset();
                for r in 0..s {
                    let start = (br * s + r) * d + bc * s;
                    out.extend_from_slice(&buf[start..start + s]);
                }
            }
        }
        Array1::from(out)
    }

    fn scatter(&self, coeffs: ArrayView1<f64>) -> Vec<f64> {
        let d = self.side;
        let mut buf = vec![0.0; d * d];
        let mut it = coeffs.iter().copied();
        let a = self.approx_side();
        for r in 0..a {
            for c in 0..a {
                buf[r * d + c] = it.next().expect("length checked");
            }
        }
        for level in 0..self.levels {
            let s = self.subband_side(level);
            for band in Subband::ALL {
                let (br, bc) = band.block_offset();
                for r in 0..s {
                    let start = (br * s + r) * d + bc * s;
                    for slot in &mut buf[start..start + s] {
                        *slot = it.next().expect("length checked");
                    }
                }
            }
        }
        buf
    }
}

/// One analysis level on the top-left `size x size` block of a `d`-wide buffer.
fn analysis_pass(buf: &mut [f64], d: usize, size: usize, scratch: &mut [f64]) {
    let half = size / 2;
    for r in 0..size {
        let row = &mut buf[r * d..r * d + size];
        for k in 0..half {
            let (a, b) = (row[2 * k], row[2 * k + 1]);
            scratch[k] = (a + b) * INV_SQRT2;
            scratch[half + k] = (a - b) * INV_SQRT2;
        }
        row.copy_from_slice(&scratch[..size]);
    }
    for c in 0..size {
        for k in 0..half {
            let (a, b) = (buf[2 * k * d + c], buf[(2 * k + 1) * d + c]);
            scratch[k] = (a + b) * INV_SQRT2;
            scratch[half + k] = (a - b) * INV_SQRT2;
        }
        for (r, &v) in scratch[..size].iter().enumerate() {
            buf[r * d + c] = v;
        }
    }
}

fn synthesis_pass(buf: &mut [f64], d: usize, size: usize, scratch: &mut [f64]) {
    let half = size / 2;
    for c in 0..size {
        for k in 0..half {
            let (lo, hi) = (buf[k * d + c], buf[(half + k) * d + c]);
            scratch[2 * k] = (lo + hi) * INV_SQRT2;
            scratch[2 * k + 1] = (lo - hi) * INV_SQRT2;
        }
        for (r, &v) in scratch[..size].iter().enumerate() {
            buf[r * d + c] = v;
        }
    }
    for r in 0..size {
        let row = &mut buf[r * d..r * d + size];
        for k in 0..half {
            let (lo, hi) = (row[k], row[half + k]);
            scratch[2 * k] = (lo + hi) * INV_SQRT2;
            scratch[2 * k + 1] = (lo - hi) * INV_SQRT2;
        }
        row.copy_from_slice(&scratch[..size]);
    }
}

/// `theta = Psi^T x` for a square power-of-two image.
pub fn forward_dwt2(image: ArrayView2<f64>, levels: usize) -> Result<Array1<f64>> {
    let (r, c) = image.dim();
    if r != c {
        return Err(Error::InvalidGeometry(format!("image is {r}x{c}, not square")));
    }
    Haar2d::new(r, levels)?.forward(image)
}

/// `x = Psi theta`.
pub fn inverse_dwt2(coeffs: ArrayView1<f64>, levels: usize) -> Result<Array2<f64>> {
    Haar2d::from_len(coeffs.len(), levels)?.inverse(coeffs)
}

/// Level label of a coefficient: `None` for approximation ("level -1"),
/// `Some(j)` for wavelet level `j`.
pub type Level = Option<usize>;

/// Parent/children links of the wavelet quad-tree forest.
#[derive(Debug, Clone)]
pub struct QuadTreeIndex {
    geometry: Haar2d,
    levels: Vec<Level>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    approx_set: Vec<usize>,
    level_sets: Vec<Vec<usize>>,
}

impl QuadTreeIndex {
    pub fn geometry(&self) -> Haar2d {
        self.geometry
    }

    /// Number of coefficients `N`.
    pub fn n_total(&self) -> usize {
        self.levels.len()
    }

    /// Number of wavelet levels `J`.
    pub fn depth(&self) -> usize {
        self.geometry.levels
    }

    pub fn level(&self, n: usize) -> Level {
        self.levels[n]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.parent[n]
    }

    /// Four children for levels `0..J-2`, empty otherwise.
    pub fn children(&self, n: usize) -> &[usize] {
        &self.children[n]
    }

    /// Indices of the approximation coefficients (`W_{-1}`).
    pub fn approx_set(&self) -> &[usize] {
        &self.approx_set
    }

    /// Indices of wavelet level `j` (`W_j`).
    pub fn level_set(&self, level: usize) -> &[usize] {
        &self.level_sets[level]
    }

    /// Indices of the given level label.
    pub fn set_of(&self, level: Level) -> &[usize] {
        match level {
            None => &self.approx_set,
            Some(j) => &self.level_sets[j],
        }
    }

    /// Tree roots (`W_0`).
    pub fn roots(&self) -> &[usize] {
        &self.level_sets[0]
    }
}

/// Builds the quad-tree index for a `side x side` image with `levels` scales.
pub fn build_tree_index(side: usize, levels: usize) -> Result<QuadTreeIndex> {
    let g = Haar2d::new(side, levels)?;
    let n = g.len();
    let mut lv = vec![None; n];
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let a = g.approx_side();
    let approx_set: Vec<usize> = (0..a * a).collect();
    let mut level_sets = Vec::with_capacity(levels);
    for j in 0..levels {
        let s = g.subband_side(j);
        let start = g.level_offset(j);
        level_sets.push((start..start + 3 * s * s).collect::<Vec<_>>());
        for band in Subband::ALL {
            for r in 0..s {
                for c in 0..s {
                    let idx = g.index(j, band, r, c);
                    lv[idx] = Some(j);
                    if j + 1 < levels {
                        let kids: Vec<usize> = [(0, 0), (0, 1), (1, 0), (1, 1)]
                            .iter()
                            .map(|&(dr, dc)| g.index(j + 1, band, 2 * r + dr, 2 * c + dc))
                            .collect();
                        for &k in &kids {
                            parent[k] = Some(idx);
                        }
                        children[idx] = kids;
                    }
                }
            }
        }
    }
    Ok(QuadTreeIndex {
        geometry: g,
        levels: lv,
        parent,
        children,
        approx_set,
        level_sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use turbo_amp_oracles::haar::dense_haar_basis;

    fn random_image(side: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((side, side), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn constant_2x2() {
        let x = array![[1.0, 1.0], [1.0, 1.0]];
        let t = forward_dwt2(x.view(), 1).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-15);
        assert!(t.iter().skip(1).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ramp_matches_dense_basis() {
        let x = Array2::from_shape_fn((4, 4), |(r, c)| (4 * r + c) as f64);
        let t = forward_dwt2(x.view(), 2).unwrap();
        let basis = dense_haar_basis(4, 2);
        let flat: Vec<f64> = x.iter().copied().collect();
        for (k, row) in basis.iter().enumerate() {
            let expect: f64 = row.iter().zip(&flat).map(|(a, b)| a * b).sum();
            assert!((t[k] - expect).abs() < 1e-12, "coefficient {k}");
        }
    }

    #[test]
    fn dense_basis_random_8x8() {
        let x = random_image(8, 3);
        let t = forward_dwt2(x.view(), 3).unwrap();
        let flat: Vec<f64> = x.iter().copied().collect();
        for (k, row) in dense_haar_basis(8, 3).iter().enumerate() {
            let expect: f64 = row.iter().zip(&flat).map(|(a, b)| a * b).sum();
            assert!((t[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_give_zero_image() {
        let img = inverse_dwt2(Array1::zeros(64).view(), 2).unwrap();
        assert!(img.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_approx_coefficient() {
        let img = inverse_dwt2(array![1.0, 0.0, 0.0, 0.0].view(), 1).unwrap();
        assert!(img.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn round_trip_64() {
        let x = random_image(64, 11);
        let t = forward_dwt2(x.view(), 4).unwrap();
        let back = inverse_dwt2(t.view(), 4).unwrap();
        let err = (&back - &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10);
    }

    #[test]
    fn geometry_errors() {
        assert!(matches!(Haar2d::new(12, 1), Err(Error::InvalidGeometry(_))));
        assert!(matches!(Haar2d::new(8, 4), Err(Error::InvalidGeometry(_))));
        assert!(matches!(Haar2d::new(8, 0), Err(Error::InvalidGeometry(_))));
        let x = Array2::<f64>::zeros((4, 8));
        assert!(forward_dwt2(x.view(), 1).is_err());
        assert!(inverse_dwt2(Array1::zeros(15).view(), 1).is_err());
        assert!(inverse_dwt2(Array1::zeros(16).view(), 3).is_err());
    }

    #[test]
    fn tree_sizes_128() {
        let t = build_tree_index(128, 4).unwrap();
        assert_eq!(t.approx_set().len(), 64);
        assert_eq!(t.level_set(0).len(), 192);
        assert_eq!(t.level_set(3).len(), 12288);
        for j in 0..3 {
            assert_eq!(t.level_set(j + 1).len(), 4 * t.level_set(j).len());
        }
    }

    #[test]
    fn smallest_tree() {
        let t = build_tree_index(2, 1).unwrap();
        assert_eq!(t.approx_set(), &[0]);
        assert_eq!(t.roots(), &[1, 2, 3]);
        assert!(t.roots().iter().all(|&r| t.children(r).is_empty()));
    }

    #[test]
    fn parent_child_round_trip_8() {
        let t = build_tree_index(8, 2).unwrap();
        assert_eq!(t.roots().len(), 12);
        for &r in t.roots() {
            assert_eq!(t.children(r).len(), 4);
            assert!(t.parent(r).is_none());
            for &c in t.children(r) {
                assert_eq!(t.parent(c), Some(r));
                assert_eq!(t.level(c), Some(1));
            }
        }
        // every level-1 node claimed exactly once
        let mut seen = vec![0; t.n_total()];
        for &r in t.roots() {
            for &c in t.children(r) {
                seen[c] += 1;
            }
        }
        assert!(t.level_set(1).iter().all(|&c| seen[c] == 1));
    }

    #[test]
    fn level_sets_partition() {
        let t = build_tree_index(32, 3).unwrap();
        let mut hit = vec![0u8; t.n_total()];
        for &n in t.approx_set() {
            hit[n] += 1;
        }
        for j in 0..3 {
            for &n in t.level_set(j) {
                hit[n] += 1;
                assert_eq!(t.level(n), Some(j));
            }
        }
        assert!(hit.iter().all(|&h| h == 1));
    }

    #[test]
    fn forest_reachability() {
        let t = build_tree_index(16, 3).unwrap();
        for j in 1..3 {
            for &n in t.level_set(j) {
                // walk up; must terminate at a root within j steps
                let mut cur = n;
                let mut steps = 0;
                while let Some(p) = t.parent(cur) {
                    cur = p;
                    steps += 1;
                    assert!(steps <= j);
                }
                assert_eq!(t.level(cur), Some(0));
                assert_eq!(steps, j);
            }
        }
    }

    proptest! {
        #[test]
        fn adjoint_and_parseval(seed in any::<u64>(), log_side in 1usize..6) {
            let side = 1 << log_side;
            let levels = 1 + (seed as usize % log_side);
            let x = random_image(side, seed);
            let theta = random_image(side, seed ^ 0xabcdef);
            let theta = Array1::from_iter(theta.iter().copied());
            let fx = forward_dwt2(x.view(), levels).unwrap();
            let it = inverse_dwt2(theta.view(), levels).unwrap();
            let lhs = fx.dot(&theta);
            let rhs: f64 = x.iter().zip(it.iter()).map(|(a, b)| a * b).sum();
            let scale = fx.dot(&fx).sqrt() * theta.dot(&theta).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((fx.dot(&fx).sqrt() - nx).abs() <= 1e-12 * nx);
        }
    }
}
