//! Crate-wide error type.

/// Errors produced by the library.
///
/// The three variants map onto the CLI exit-code contract: `Validation`
/// signals bad parameters (usage, exit 1), `Data` signals rejected input
/// data or files (exit 2), and `Internal` signals a violated sampler
/// invariant (exit 3, always a bug).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Validation(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
