use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared identifier: {0}")]
    Undeclared(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("unrecoverable failure: all workers failed with {} iteration(s) unfinished", unfinished.len())]
    Unrecoverable { unfinished: Vec<u64> },
}

impl Error {
    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn ty(msg: impl Into<String>) -> Self {
        Error::Type(msg.into())
    }
}
