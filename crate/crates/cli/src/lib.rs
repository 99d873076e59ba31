//! Configuration-driven experiment runner for the `decprox` library.

pub mod config;
pub mod experiment;
pub mod libsvm;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] decprox::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(decprox::Error::Divergence { .. }) => 3,
            CliError::Core(
                decprox::Error::Parse { .. }
                | decprox::Error::InvalidData(_)
                | decprox::Error::InvalidSize(_)
                | decprox::Error::Domain(_)
                | decprox::Error::UnsupportedAlgorithm(_),
            ) => 2,
            _ => 1,
        }
    }
}
