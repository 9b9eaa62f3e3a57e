use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown channel label `{0}`")]
    UnknownChannel(String),

    #[error("invalid channel layout: {0}")]
    InvalidLayout(String),

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("index range {start}..{end} out of bounds for {len} samples")]
    OutOfRange { start: usize, end: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid event stream: {0}")]
    InvalidEvents(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("mismatched time axes: {0}")]
    MismatchedAxes(String),

    #[error("recording too short for filtering: {n_samples} samples, need at least {required}")]
    TooShort { n_samples: usize, required: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("missing {what} at {}", path.display())]
    Missing { what: String, path: PathBuf },

    #[error("i/o error at {}: {source}", path.display())]
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
    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
