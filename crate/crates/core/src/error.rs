use std::path::PathBuf;

use crate::amp::AmpState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {what} at AMP iteration {iter}")]
    NonFinite { what: &'static str, iter: usize },

    /// The corrected residual blew up; the last finite state is attached.
    #[error("AMP diverged at iteration {iter}: residual norm grew by {ratio:.3e}x")]
    AmpDiverged {
        iter: usize,
        ratio: f64,
        last_state: Box<AmpState>,
    },

    #[error("image format error in {path}: {reason}")]
    ImageFormat { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
