use std::path::PathBuf;

/// Errors produced by the optimizer and its numeric building blocks.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or unsupported configuration (shapes, names, variants).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical procedure failed (Cholesky breakdown, non-PSD input, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Two training inputs coincide, which a noise-free GP cannot represent.
    #[error("duplicate training rows {first} and {second}")]
    DuplicateRows { first: usize, second: usize },

    /// The true objective function failed.
    #[error("objective evaluation failed: {0}")]
    Evaluation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error on {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
