use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong shapes, non-unit vectors, out-of-range parameters.
    #[error("validation error: {0}")]
    Validation(String),

    /// An optimizer left the finite range.
    #[error("optimization diverged at iteration {iteration}: {detail}")]
    Optimization { iteration: usize, detail: String },

    /// A caller broke an ordering or coverage contract (e.g. an unassigned class).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Normalizing a vector whose norm is (numerically) zero.
    #[error("degenerate vector: {0}")]
    Degenerate(String),

    /// Assignment requested before every class center has been observed.
    #[error("not ready: {0}")]
    NotReady(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse(line: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            line,
            detail: detail.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse { .. } | Error::Io(_) => 2,
            Error::Optimization { .. }
            | Error::Contract(_)
            | Error::Degenerate(_)
            | Error::NotReady(_) => 3,
        }
    }
}
