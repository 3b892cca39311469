//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by panel construction, statistics, codecs, and the
/// simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric argument fell outside its mathematical domain
    /// (e.g. an allele frequency outside `[0, 1]`, or `q <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value or combination of values is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A text input (VCF, sample map, genetic map, region file) failed to
    /// parse. `line` is 1-based; 0 means the error is not tied to a line.
    #[error("parse error in {}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    /// A binary container failed validation (bad magic, truncation,
    /// inconsistent dimensions).
    #[error("container format error: {0}")]
    Format(String),

    /// The requested statistic is undefined on the given input
    /// (e.g. a ratio whose denominator is zero on every locus).
    #[error("statistic undefined: {0}")]
    UndefinedStatistic(String),

    /// An underlying I/O failure.
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attaches a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Builds a [`Error::Parse`] with a 1-based line number.
    pub fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
