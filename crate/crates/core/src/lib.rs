//! Compressive imaging by turbo message passing.
//!
//! An image `x = Psi theta` is recovered from `y = Phi x + w` by alternating two
//! inference stages on the activity states of its Haar wavelet coefficients:
//!
//! * soft support recovery: AMP over `A = Phi Psi` with Bernoulli-Gaussian or
//!   two-state Gaussian-mixture coefficient priors ([`amp`], [`denoiser`]);
//! * soft support decoding: exact sum-product on the wavelet quad-trees under a
//!   hidden Markov tree prior ([`hmt`]).
//!
//! The stages exchange extrinsic activity beliefs, and the model parameters are
//! re-estimated between rounds with conjugate Gamma/Beta updates ([`learning`]).
//! [`turbo::reconstruct`] drives the whole loop; [`cli`] holds the file-level harness
//! behind the `turbo-amp` binary.

pub mod amp;
pub mod cli;
pub mod denoiser;
pub mod error;
pub mod hmt;
pub mod learning;
pub mod measurement;
pub mod signals;
pub mod turbo;
pub mod wavelet;

pub use error::{Error, Result};
