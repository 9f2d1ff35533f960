//! Error type shared across the toolkit.

use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum Error {
    /// A coordinate fell outside the grid extent.
    OutOfBounds { coord: [usize; 3], dims: [usize; 3] },
    /// Two containers that must share an extent do not.
    DimsMismatch {
        expected: [usize; 3],
        actual: [usize; 3],
    },
    /// A file's bytes do not match the declared format.
    Format(String),
    /// An in-memory value violates a container invariant.
    Invalid(String),
    /// A threshold or option set is inconsistent.
    Config(String),
    /// A scene spec is outside the closed-form solvable family.
    UnsupportedScene(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfBounds { coord, dims } => write!(
                f,
                "coordinate ({}, {}, {}) out of bounds for grid {}x{}x{}",
                coord[0], coord[1], coord[2], dims[0], dims[1], dims[2]
            ),
            Error::DimsMismatch { expected, actual } => write!(
                f,
                "dimension mismatch: expected {}x{}x{}, got {}x{}x{}",
                expected[0], expected[1], expected[2], actual[0], actual[1], actual[2]
            ),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Invalid(msg) => write!(f, "invalid data: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::UnsupportedScene(msg) => write!(f, "unsupported scene: {msg}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
