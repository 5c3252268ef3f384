use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Precondition violated (bad index, shape mismatch, repeated wire, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("capacity error: {features} features do not fit in {capacity} amplitudes")]
    Capacity { features: usize, capacity: usize },

    #[error("gate is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("degenerate readout: p0 + p1 = {0:.3e}")]
    DegenerateReadout(f64),

    /// Metric undefined for the inputs (zero variance, constant ranks, empty counts).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error on line {line}: {message}")]
    Validation { line: u64, message: String },

    #[error("ordering error on line {line}: date {date} does not follow {previous}")]
    Ordering {
        line: u64,
        date: String,
        previous: String,
    },

    #[error("normalization error: feature `{0}` is constant over the fitting range")]
    ConstantFeature(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by flags or training.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Ordering { .. }
                | Error::ConstantFeature(_)
                | Error::InsufficientData(_)
                | Error::Io { .. }
                | Error::Json(_)
        )
    }
}
