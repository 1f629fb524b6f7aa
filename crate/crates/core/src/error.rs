use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected q = {expected}, found q = {found}")]
    DimensionMismatch { expected: u32, found: u32 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{what} did not converge (achieved error bound {achieved:e})")]
    Convergence { what: &'static str, achieved: f64 },
    #[error("missing resource: {0}")]
    Missing(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of numerical routines rather than of inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
