//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised while building, validating or evaluating a system model.
#[derive(Debug, Error)]
pub enum Error {
    /// An array size or count violates a structural requirement.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two nodes share a position, so a path loss would be infinite.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// An interference term was requested for a user paired with itself.
    #[error("interference requires distinct users, got k = i = {0}")]
    InvalidPair(usize),

    /// Two inputs that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A configuration file could not be read or parsed.
    #[error("configuration error: {0}")]
    Config(String),

    /// Underlying I/O failure while writing results.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV serialization failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// JSON serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
