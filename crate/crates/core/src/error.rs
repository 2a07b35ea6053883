use std::path::PathBuf;

use crate::graph::GraphError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("game {game_id} step ({walkthrough_step}, {random_step}): replayed graph does not match the previous graph ({detail})")]
    Desync {
        game_id: String,
        walkthrough_step: u32,
        random_step: u32,
        detail: String,
    },
    #[error("non-finite loss at batch {batch} (step {step})")]
    Divergence { step: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
