use std::io;

use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Contract` covers precondition violations (bad dimensions, invalid
/// constants). `Diverged` is raised by the executors when an update or a
/// loss stops being finite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("run diverged: {0}")]
    Diverged(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed quantized dataset: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
