//! Error types shared by the whole crate.

use thiserror::Error;

/// Unified error type for container construction, file I/O, decomposition,
/// and training.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition or container invariant was violated.
    #[error("validation error: {0}")]
    Validation(String),

    /// Underlying I/O failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file did not match the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    /// An iterative algorithm failed to converge.
    #[error("{algorithm} did not converge after {iterations} iterations (last delta {last_delta:e}, tolerance {tolerance:e})")]
    Convergence {
        algorithm: &'static str,
        iterations: usize,
        last_delta: f64,
        tolerance: f64,
    },

    /// A non-finite value appeared where the math requires finite numbers.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
