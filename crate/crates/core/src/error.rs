//! Error type shared by every module of the library.

use thiserror::Error;

/// Errors raised by geometry, solver, grouping, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two inputs disagree in shape or dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A matrix that should be a rotation is not orthonormal or has det != 1.
    #[error("matrix is not a rotation (orthonormality defect {defect:.3e})")]
    NotARotation { defect: f64 },

    /// The gauge fundamental solution is singular at the identity.
    #[error("fundamental gauge is singular at the identity")]
    Singularity,

    /// A computation could not produce a meaningful number.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A required input (mask, label, orientation evidence) is missing.
    #[error("missing data: {0}")]
    MissingData(String),

    /// Underlying file system error.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON header or config.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
