use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("session {0} is closed")]
    SessionClosed(String),

    #[error("malformed packet: {0}")]
    MalformedPacket(String),

    #[error("malformed rule base: {0}")]
    MalformedRules(String),

    #[error("{path}:{line}: {reason}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("trace line {line}: {reason}")]
    CorruptTrace { line: usize, reason: String },

    #[error("protocol error at byte {offset}: {reason}")]
    Protocol { offset: usize, reason: String },

    #[error("server error {code}: {detail}")]
    Remote { code: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
