use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum EffcodeError {
    /// Two operands disagree on a dimension that must match.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A scalar or structural argument is outside its documented domain.
    #[error("invalid argument {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// Underlying file I/O failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but does not parse as the expected format.
    #[error("malformed {format} file {path}: {reason}")]
    Format {
        format: &'static str,
        path: PathBuf,
        reason: String,
    },

    /// A stored tensor's checksum does not match its payload.
    #[error("checksum mismatch for tensor {name} in {path}")]
    ChecksumMismatch { name: String, path: PathBuf },

    /// A tensor requested by name is absent from a container.
    #[error("tensor {name} not found in {path}")]
    TensorNotFound { name: String, path: PathBuf },

    /// JSON (de)serialization failed.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// An output path exists and overwriting was not requested.
    #[error("refusing to overwrite {path} without --force")]
    WouldOverwrite { path: PathBuf },
}

pub type Result<T> = std::result::Result<T, EffcodeError>;

impl EffcodeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EffcodeError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        EffcodeError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub fn shape(context: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        EffcodeError::ShapeMismatch {
            context,
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
