//! Error type shared across the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A record on the given 1-based input line could not be parsed.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("grid file: {0}")]
    GridFormat(String),

    /// Normalization of a count grid whose total is zero.
    #[error("empty distribution: grid total is zero")]
    EmptyDistribution,

    /// Two grids that must share a `GridSpec` do not.
    #[error("grid specs differ: {0}")]
    SpecMismatch(String),

    /// Correlation or fit requested on degenerate data.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// Angle histogram over grids with no occupied bin.
    #[error("no data: every bin is empty in both grids")]
    NoData,

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { what, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
