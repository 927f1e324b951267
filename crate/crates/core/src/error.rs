use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the computation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("sample interval mismatch: {left} h vs {right} h")]
    IntervalMismatch { left: f64, right: f64 },

    #[error("negative sample at index {index}: {value}")]
    NegativeSample { index: usize, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A configuration field failed validation. `field` is the dotted path.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("config file {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("malformed QFD matrix: {0}")]
    MalformedMatrix(String),

    #[error("time series file {path}: {reason}")]
    SeriesFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
