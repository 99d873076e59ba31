use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),
    #[error("unsupported algorithm: {0}")]
    UnsupportedAlgorithm(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("diverged at iteration {iter}: {reason}")]
    Divergence { iter: usize, reason: String },
    #[error("oracle failed: {0}")]
    OracleFailure(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
