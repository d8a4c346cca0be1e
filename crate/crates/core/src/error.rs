use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("cell ({row}, {col}) is not a floor cell")]
    NotFloor { row: usize, col: usize },

    #[error("episode is already finished")]
    EpisodeDone,

    #[error("unknown observation kind `{0}` (expected ego5, fs or sg)")]
    UnknownObservation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid value: {0}")]
    Value(String),

    #[error("invalid variant: {0}")]
    Variant(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
