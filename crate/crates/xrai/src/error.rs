//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two inputs that must share dimensions do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input is structurally valid but degenerate for the requested
    /// computation (e.g. an all-positive ground-truth mask).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A corpus manifest failed to parse. `line` is 1-based.
    #[error("manifest error at line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    /// Malformed binary or image file.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 i/o, 3 numeric/degenerate.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 1,
            Error::DimensionMismatch(_) => 3,
            Error::Degenerate(_) => 3,
            Error::Manifest { .. } => 2,
            Error::Format(_) => 2,
            Error::Io(_) => 2,
        }
    }
}
