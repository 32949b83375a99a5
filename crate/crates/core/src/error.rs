use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Smallest eigenvalue fell at or below `rel_tol * lambda_max`.
    #[error(
        "matrix of dimension {dim} is not positive definite \
         (lambda_min = {lambda_min:e}, lambda_max = {lambda_max:e})"
    )]
    NotPositiveDefinite {
        dim: usize,
        lambda_min: f64,
        lambda_max: f64,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A variance estimate on the diagonal is not strictly positive (0-based index).
    #[error("degenerate variance at index {index} (value {value:e})")]
    DegenerateVariance { index: usize, value: f64 },

    #[error("{path}: row {row}, column {col}: cannot parse {cell:?} as a finite number")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },

    #[error("{path}: {message}")]
    Shape { path: PathBuf, message: String },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the numbers rather than by the request.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NumericalFailure(_)
            | Error::DegenerateVariance { .. } => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
