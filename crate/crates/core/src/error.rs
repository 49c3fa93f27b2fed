use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column {column}: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },
    #[error("invalid dataset: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(
        "gamma shape approximation did not converge after {iterations} iterations \
         (last iterate shape={shape}, rate={rate})"
    )]
    ShapeApproxNonConvergence {
        iterations: usize,
        shape: f64,
        rate: f64,
    },
    #[error("selector out of range: {0}")]
    Selector(String),
    #[error("duration model required: {0}")]
    DurationModelRequired(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed fit directory: {0}")]
    Artifact(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            row,
            column: column.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Selector(_) | Error::DurationModelRequired(_) => 1,
            Error::Validation { .. }
            | Error::Data(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Artifact(_) => 2,
            Error::Numerical(_) | Error::ShapeApproxNonConvergence { .. } => 3,
        }
    }
}
