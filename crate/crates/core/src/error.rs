use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent shapes, grids or options.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The linear solver did not reach its tolerance.
    #[error("solver failed to converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// The assembled system could not be factorized.
    #[error("singular or unfactorizable system: {0}")]
    Singular(String),

    /// The probe solutions do not form a proper set of measurements.
    #[error("improper measurement set: {0}")]
    Improper(String),

    /// Malformed persisted data.
    #[error("format error: {0}")]
    Format(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn parameter<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
