//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The scenario or experiment configuration is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An argument is outside the operation's domain (bad dimension,
    /// non-positive distance, zero sample count, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (factorization, singular covariance).
    /// `jitter_attempted` carries the largest diagonal jitter tried before
    /// giving up, when applicable.
    #[error("numerical failure: {reason}")]
    Numerical {
        reason: String,
        jitter_attempted: Option<f64>,
    },

    /// An API contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed structured-text input (config file, model file).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, jitter: Option<f64>) -> Self {
        Error::Numerical {
            reason: msg.into(),
            jitter_attempted: jitter,
        }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
