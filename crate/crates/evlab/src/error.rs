//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("non-finite values encountered in {context}")]
    NonFinite { context: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "spectral data violates Hermitian symmetry (relative imaginary residue {residue:.3e})"
    )]
    HermitianViolation { residue: f64 },

    #[error("vacuum breach: min h = {min_value:.6e} at grid index {location:?}, at or below floor {floor:.3e}")]
    VacuumBreach {
        min_value: f64,
        location: Vec<usize>,
        floor: f64,
    },

    #[error("negative time {0} not allowed")]
    NegativeTime(f64),

    #[error("grid too coarse for dyadic decomposition: {0}")]
    TooCoarse(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("time-sampling mismatch: {0}")]
    SamplingMismatch(String),

    #[error("empty time series")]
    EmptySeries,

    #[error("verification failure: {0}")]
    VerificationFailed(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
