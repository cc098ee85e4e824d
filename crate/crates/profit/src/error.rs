use std::path::PathBuf;

use profit_core::data::DataError;
use profit_core::training::TrainError;
use profit_core::{BackendError, PvpError};
use thiserror::Error;

/// Everything the runner and CLI can fail with.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("data: {0}")]
    Tsv(#[from] crate::tsv::TsvError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] crate::checkpoint::CheckpointError),
    #[error("store: {0}")]
    Store(#[from] crate::store::StoreError),
    #[error("plot: {0}")]
    Plot(#[from] crate::plot::PlotError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("training: {0}")]
    Backend(#[from] BackendError),
    #[error("training: {0}")]
    Pvp(#[from] PvpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;
pub const EXIT_DUPLICATE: i32 = 5;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::Store(crate::store::StoreError::DuplicateRun(_)) => EXIT_DUPLICATE,
            Error::Tsv(_) | Error::Data(_) | Error::Checkpoint(_) | Error::Store(_) | Error::Io { .. } | Error::Input(_)
            | Error::Plot(_) => {
                EXIT_DATA
            }
            Error::Train(TrainError::Data(_)) => EXIT_DATA,
            Error::Train(TrainError::ConfigInvalid(_)) => EXIT_CONFIG,
            Error::Train(_) | Error::Backend(_) | Error::Pvp(_) => EXIT_TRAINING,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
