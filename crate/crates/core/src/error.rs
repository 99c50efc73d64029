//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors produced by the positioning pipeline.
///
/// The variants map onto process exit codes in the CLI: `Io` is an
/// input/output failure (2), `Data` is a malformed file or schema violation
/// (3), `Invalid` is a rejected argument or configuration value (3), and
/// `Numerical` is a numerical failure such as a non-finite loss (4).
#[derive(Debug)]
pub enum Error {
    Io(io::Error),
    Data(String),
    Invalid(String),
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "I/O error: {e}"),
            Self::Data(s) => write!(f, "data error: {s}"),
            Self::Invalid(s) => write!(f, "invalid argument: {s}"),
            Self::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        if let Self::Io(e) = self {
            Some(e)
        } else {
            None
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Self::Numerical(msg.into())
    }
}
