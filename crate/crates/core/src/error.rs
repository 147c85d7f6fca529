use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("topology has no base stations")]
    NoBaseStations,

    #[error("base station index {index} out of range ({count} base stations)")]
    BsIndexOutOfRange { index: usize, count: usize },

    #[error("episode already finished after {steps} steps")]
    EpisodeDone { steps: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("nothing to run")]
    NothingToRun,

    #[error("cell {cell_id}: {source}")]
    Cell {
        cell_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("log mismatch at {0}")]
    LogMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
