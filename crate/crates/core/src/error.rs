use thiserror::Error;

use crate::stream::Violation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid stream at update {position}: {violation}")]
    InvalidStream { position: usize, violation: Violation },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("branch budget of {0} exceeded")]
    BranchBudgetExceeded(u64),
    #[error("window estimate degraded")]
    DegradedEstimate,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
