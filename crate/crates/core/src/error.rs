use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural argument was outside its allowed range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A location fell outside the domain it was bound to.
    #[error("location ({lon}, {lat}) lies outside the domain")]
    DomainViolation { lon: f64, lat: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
