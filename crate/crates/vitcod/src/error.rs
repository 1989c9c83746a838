//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps these onto process exit codes: argument errors exit 2,
/// file/format errors exit 3, domain and configuration errors exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A value violates a domain precondition (negative score, zero row, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Tensor/matrix shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed array-file header or structure.
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed file using a feature outside the supported subset.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Payload shorter or longer than the header promises.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    /// A hardware configuration cannot be scheduled; names the violated constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// The auto-encoder trainer diverged.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
