use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed document: {message}")]
    Parse { line: usize, message: String },

    #[error("document {doc:?}: invalid {field}: {reason}")]
    Invalid {
        doc: String,
        field: String,
        reason: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("encoding conflict at position {position}: {existing} vs {incoming}")]
    EncodingConflict {
        position: usize,
        existing: String,
        incoming: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
