//! Error type shared by the whole engine.

use std::path::PathBuf;

/// Errors produced by reconstruction, metric, and I/O operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested configuration is valid in general but not supported
    /// by this algorithm (e.g. a multi-axis stack passed to SIRT).
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// The iteration produced non-finite values or a runaway objective.
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    /// A metric is undefined for the given data (e.g. an all-zero
    /// measured projection in the R-factor denominator).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A file does not conform to its on-disk format.
    #[error("format error in {path}: {reason} (at byte {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    /// An I/O failure, with the path that was being accessed.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            reason: reason.into(),
        }
    }
}
