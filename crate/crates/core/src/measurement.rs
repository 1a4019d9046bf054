//! Gaussian measurement operators and the composite system `A = Phi Psi`.
//!
//! `Phi` has i.i.d. `N(0, 1/M)` entries. Row `m` is drawn from a ChaCha20 stream
//! seeded with the operator seed and stream id `m`, converted to normals with the
//! ziggurat sampler of `rand_distr::StandardNormal`. Only the header
//! (`m`, `n`, seed, generator name) needs to be stored; the matrix is regenerated.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::wavelet::Haar2d;

/// Name recorded in operator headers for the sampling scheme above.
pub const GENERATOR_NAME: &str = "chacha20-ziggurat";

/// Row-parallel `a x`. Each output entry is one sequential dot product, so the
/// result does not depend on the thread count.
fn gemv(a: ArrayView2<f64>, x: ArrayView1<f64>) -> Array1<f64> {
    let Some(data) = a.as_slice() else {
        return a.dot(&x);
    };
    let (x, n) = (x.to_vec(), a.ncols());
    let out: Vec<f64> = data
        .par_chunks(n.max(1))
        .map(|row| dot(row, &x))
        .collect();
    Array1::from_vec(out)
}

/// Dot product with eight fixed partial sums, which lets the compiler vectorize.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(p, q)| p * q).sum();
    for (p, q) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += p[k] * q[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Column-block-parallel `a^T r`, summing rows in order within each block.
fn gemv_t(a: ArrayView2<f64>, r: ArrayView1<f64>) -> Array1<f64> {
    const BLOCK: usize = 512;
    let Some(data) = a.as_slice() else {
        return a.t().dot(&r);
    };
    let n = a.ncols();
    let mut out = vec![0.0; n];
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, acc)| {
        let (c0, c1) = (b * BLOCK, b * BLOCK + acc.len());
        for (row, &w) in data.chunks(n).zip(r.iter()) {
            for (o, p) in acc.iter_mut().zip(&row[c0..c1]) {
                *o += w * p;
            }
        }
    });
    Array1::from_vec(out)
}

/// A real linear map together with its adjoint.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64>;
    fn apply_adjoint(&self, r: ArrayView1<f64>) -> Array1<f64>;
}

/// The sensing matrix `Phi` (`M x N`).
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    phi: Array2<f64>,
    seed: Option<u64>,
}

/// A noisy observation `y` and its noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Array1<f64>,
    pub sigma2: f64,
}

impl MeasurementOperator {
    /// I.i.d. Gaussian operator; rejects `m > n`.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "measurement count must satisfy 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        Ok(Self::gaussian_unchecked(m, n, seed))
    }

    /// Like [`gaussian`](Self::gaussian) but only warns when `m > n`.
    pub fn gaussian_oversampled(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("empty operator".into()));
        }
        if m > n {
            log::warn!("oversampled operator: m={m} > n={n}");
        }
        Ok(Self::gaussian_unchecked(m, n, seed))
    }

    fn gaussian_unchecked(m: usize, n: usize, seed: u64) -> Self {
        let scale = 1.0 / (m as f64).sqrt();
        let mut data = vec![0.0; m * n];
        data.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(row as u64);
            for v in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = z * scale;
            }
        });
        Self {
            phi: Array2::from_shape_vec((m, n), data).expect("m*n entries"),
            seed: Some(seed),
        }
    }

    /// `scale * I_n`, for decoupled-channel tests.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        Self {
            phi: Array2::eye(n) * scale,
            seed: None,
        }
    }

    pub fn from_matrix(phi: Array2<f64>) -> Self {
        Self { phi, seed: None }
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n(&self) -> usize {
        self.phi.ncols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.phi.view()
    }

    /// Header from which a seeded operator can be regenerated.
    pub fn header(&self) -> Option<OperatorHeader> {
        self.seed.map(|seed| OperatorHeader {
            m: self.m(),
            n: self.n(),
            seed,
            generator: GENERATOR_NAME.to_string(),
        })
    }

    /// `y = Phi x + w`, `w ~ N(0, sigma2 I)` drawn from `noise_seed`.
    pub fn measure(
        &self,
        image: ArrayView2<f64>,
        sigma2: f64,
        noise_seed: u64,
    ) -> Result<Observation> {
        if image.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: image.len(),
                context: "measure image pixel count",
            });
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
        }
        let x = Array1::from_iter(image.iter().copied());
        let mut y = gemv(self.phi.view(), x.view());
        if sigma2 > 0.0 {
            let sd = sigma2.sqrt();
            let mut rng = ChaCha20Rng::seed_from_u64(noise_seed);
            for v in y.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += sd * z;
            }
        }
        Ok(Observation { y, sigma2 })
    }
}

impl LinearOperator for MeasurementOperator {
    fn rows(&self) -> usize {
        self.m()
    }

    fn cols(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        gemv(self.phi.view(), x)
    }

    fn apply_adjoint(&self, r: ArrayView1<f64>) -> Array1<f64> {
        gemv_t(self.phi.view(), r)
    }
}

/// Persisted form of a seeded operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorHeader {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub generator: String,
}

impl OperatorHeader {
    pub fn regenerate(&self) -> Result<MeasurementOperator> {
        if self.generator != GENERATOR_NAME {
            return Err(Error::InvalidParameter(format!(
                "unknown generator {:?}",
                self.generator
            )));
        }
        MeasurementOperator::gaussian_oversampled(self.m, self.n, self.seed)
    }
}

impl fmt::Display for OperatorHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "m={}", self.m)?;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "generator={}", self.generator)
    }
}

impl FromStr for OperatorHeader {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut m, mut n, mut seed, mut generator) = (None, None, None, None);
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed header line {line:?}")))?;
            let bad = |_| Error::Config(format!("bad value for {k}: {v:?}"));
            match k.trim() {
                "m" => m = Some(v.trim().parse().map_err(bad)?),
                "n" => n = Some(v.trim().parse().map_err(bad)?),
                "seed" => seed = Some(v.trim().parse().map_err(bad)?),
                "generator" => generator = Some(v.trim().to_string()),
                other => return Err(Error::Config(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Config(format!("operator header is missing {k}"));
        Ok(Self {
            m: m.ok_or_else(|| missing("m"))?,
            n: n.ok_or_else(|| missing("n"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            generator: generator.ok_or_else(|| missing("generator"))?,
        })
    }
}

/// An explicit dense matrix used directly as `A` (e.g. with `Psi = I`).
#[derive(Debug, Clone)]
pub struct DenseOperator(pub Array2<f64>);

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        gemv(self.0.view(), x)
    }

    fn apply_adjoint(&self, r: ArrayView1<f64>) -> Array1<f64> {
        gemv_t(self.0.view(), r)
    }
}

/// `A = Phi Psi`: wavelet synthesis followed by the sensing matrix.
#[derive(Debug, Clone, Copy)]
pub struct SystemOperator<'a> {
    phi: &'a MeasurementOperator,
    haar: Haar2d,
}

impl<'a> SystemOperator<'a> {
    pub fn new(phi: &'a MeasurementOperator, levels: usize) -> Result<Self> {
        let haar = Haar2d::from_len(phi.n(), levels)?;
        Ok(Self { phi, haar })
    }

    pub fn haar(&self) -> Haar2d {
        self.haar
    }

    pub fn phi(&self) -> &'a MeasurementOperator {
        self.phi
    }

    /// `A theta`.
    pub fn apply_a(&self, coeffs: ArrayView1<f64>) -> Result<Array1<f64>> {
        let image = self.haar.inverse(coeffs)?;
        let flat = Array1::from_iter(image.iter().copied());
        Ok(self.phi.apply(flat.view()))
    }

    /// `A^T r`.
    pub fn apply_at(&self, residual: ArrayView1<f64>) -> Result<Array1<f64>> {
        if residual.len() != self.phi.m() {
            return Err(Error::DimensionMismatch {
                expected: self.phi.m(),
                actual: residual.len(),
                context: "apply_At residual length",
            });
        }
        let back = self.phi.apply_adjoint(residual);
        let side = self.haar.side();
        let image = back
            .into_shape_with_order((side, side))
            .expect("n = side^2");
        self.haar.forward(image.view())
    }

    /// Materializes `A` column by column (test scale only).
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.cols();
        let mut a = Array2::zeros((self.rows(), n));
        let mut e = Array1::zeros(n);
        for k in 0..n {
            e[k] = 1.0;
            a.column_mut(k).assign(&self.apply(e.view()));
            e[k] = 0.0;
        }
        a
    }
}

impl LinearOperator for SystemOperator<'_> {
    fn rows(&self) -> usize {
        self.phi.m()
    }

    fn cols(&self) -> usize {
        self.phi.n()
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.apply_a(x).expect("coefficient length matches operator")
    }

    fn apply_adjoint(&self, r: ArrayView1<f64>) -> Array1<f64> {
        self.apply_at(r).expect("residual length matches operator")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{forward_dwt2, inverse_dwt2};
    use proptest::prelude::*;
    use turbo_amp_oracles::haar::dense_haar_basis;
    use rand::Rng;

    fn rand_vec(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn deterministic_per_seed() {
        let a = MeasurementOperator::gaussian(20, 64, 7).unwrap();
        let b = MeasurementOperator::gaussian(20, 64, 7).unwrap();
        let c = MeasurementOperator::gaussian(20, 64, 8).unwrap();
        assert!(a
            .matrix()
            .iter()
            .zip(b.matrix().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn rejects_oversampling() {
        assert!(MeasurementOperator::gaussian(65, 64, 1).is_err());
        assert!(MeasurementOperator::gaussian(0, 64, 1).is_err());
        let op = MeasurementOperator::gaussian_oversampled(65, 64, 1).unwrap();
        assert_eq!(op.m(), 65);
    }

    #[test]
    fn column_norms_concentrate() {
        let op = MeasurementOperator::gaussian(5000, 16384, 42).unwrap();
        let phi = op.matrix();
        let mut total = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for col in phi.columns() {
            let s = col.dot(&col);
            total += s;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        let mean = total / 16384.0;
        assert!((mean - 1.0).abs() < 0.05, "mean column norm^2 {mean}");
        assert!(lo > 0.8 && hi < 1.2);
    }

    #[test]
    fn identity_operator() {
        let op = MeasurementOperator::scaled_identity(16, 1.0);
        let x = rand_vec(16, 3);
        assert_eq!(op.apply(x.view()), x);
    }

    #[test]
    fn noiseless_and_zero_measurements() {
        let op = MeasurementOperator::gaussian(8, 16, 1).unwrap();
        let zero = Array2::zeros((4, 4));
        assert!(op.measure(zero.view(), 0.0, 5).unwrap().y.iter().all(|&v| v == 0.0));

        let theta = rand_vec(16, 9);
        let x = inverse_dwt2(theta.view(), 2).unwrap();
        let obs = op.measure(x.view(), 0.0, 5).unwrap();
        let sys = SystemOperator::new(&op, 2).unwrap();
        let at = sys.apply_a(theta.view()).unwrap();
        for (a, b) in obs.y.iter().zip(at.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_variance() {
        let op = MeasurementOperator::scaled_identity(10_000, 1.0);
        let x = Array2::from_elem((100, 100), 3.0);
        let obs = op.measure(x.view(), 1.0, 77).unwrap();
        let w: Vec<f64> = obs.y.iter().map(|v| v - 3.0).collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "sample variance {var}");
    }

    #[test]
    fn geometry_mismatch() {
        let op = MeasurementOperator::gaussian(8, 16, 1).unwrap();
        assert!(op.measure(Array2::zeros((8, 8)).view(), 0.0, 0).is_err());
        assert!(op.measure(Array2::zeros((4, 4)).view(), -1.0, 0).is_err());
        let sys = SystemOperator::new(&op, 1).unwrap();
        assert!(sys.apply_a(Array1::zeros(15).view()).is_err());
        assert!(sys.apply_at(Array1::zeros(7).view()).is_err());
        assert!(SystemOperator::new(&op, 3).is_err());
    }

    #[test]
    fn zero_coeffs_map_to_zero() {
        let op = MeasurementOperator::gaussian(8, 16, 1).unwrap();
        let sys = SystemOperator::new(&op, 2).unwrap();
        assert!(sys.apply_a(Array1::zeros(16).view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composite_matches_dense_product() {
        let op = MeasurementOperator::gaussian(8, 16, 3).unwrap();
        let sys = SystemOperator::new(&op, 2).unwrap();
        // A = Phi Psi, with Psi's columns the analysis rows of the dense basis
        let basis = dense_haar_basis(4, 2);
        let phi = op.matrix();
        let dense = sys.to_dense();
        for m in 0..8 {
            for k in 0..16 {
                let want: f64 = (0..16).map(|p| phi[[m, p]] * basis[k][p]).sum();
                assert!((dense[[m, k]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_is_transform_composition() {
        let op = MeasurementOperator::gaussian(30, 64, 5).unwrap();
        let sys = SystemOperator::new(&op, 3).unwrap();
        let r = rand_vec(30, 1);
        let back = op.apply_adjoint(r.view()).into_shape_with_order((8, 8)).unwrap();
        let want = forward_dwt2(back.view(), 3).unwrap();
        assert_eq!(sys.apply_at(r.view()).unwrap(), want);
    }

    #[test]
    fn header_round_trip() {
        let op = MeasurementOperator::gaussian(12, 64, 99).unwrap();
        let header = op.header().unwrap();
        let parsed: OperatorHeader = header.to_string().parse().unwrap();
        assert_eq!(parsed, header);
        assert_eq!(parsed.regenerate().unwrap().matrix(), op.matrix());
        assert!("m=3\nn=4\n".parse::<OperatorHeader>().is_err());
        assert!(MeasurementOperator::scaled_identity(4, 1.0).header().is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn adjoint_identity(seed in any::<u64>()) {
            let op = MeasurementOperator::gaussian(24, 64, seed).unwrap();
            let sys = SystemOperator::new(&op, 3).unwrap();
            let theta = rand_vec(64, seed ^ 1);
            let r = rand_vec(24, seed ^ 2);
            let lhs = sys.apply_a(theta.view()).unwrap().dot(&r);
            let rhs = theta.dot(&sys.apply_at(r.view()).unwrap());
            let scale = theta.dot(&theta).sqrt() * r.dot(&r).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }
}
