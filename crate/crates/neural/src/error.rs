use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model input: {0}")]
    Input(String),

    #[error("non-finite activation after layer {layer}")]
    Numeric { layer: usize },

    #[error("loss undefined: {0}")]
    UndefinedLoss(String),

    #[error("non-finite gradient in {0}; optimizer step aborted")]
    NonFiniteGradient(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] vrdie_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
