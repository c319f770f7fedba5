use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain the operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A numerical procedure failed (divergence, degenerate input, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dataset line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("unsupported dataset version {found} (expected {expected})")]
    Version { expected: String, found: String },

    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
