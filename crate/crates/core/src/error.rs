use std::path::PathBuf;

/// Errors raised by the mxpbf library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// `line` and `field` are one-based positions in the source table.
    #[error("malformed input at line {line}, field {field}: {message}")]
    MalformedInput {
        line: usize,
        field: usize,
        message: String,
    },

    #[error("degenerate data: column index {column} is constant or all zero")]
    DegenerateData { column: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid pair ({i}, {j}): {reason}")]
    InvalidPair { i: usize, j: usize, reason: String },

    #[error("invalid sample size n = {n}: {reason}")]
    InvalidSampleSize { n: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("every scanned pair is numerically collinear")]
    Collinearity,

    #[error("degenerate split: covariate column {column} has zero norm on the test rows")]
    DegenerateSplit { column: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by numerically degenerate data rather than
    /// invalid arguments.
    pub fn is_numeric_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData { .. } | Error::Collinearity | Error::DegenerateSplit { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
