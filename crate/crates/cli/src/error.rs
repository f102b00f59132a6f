use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("malformed scenario {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Numerics(#[from] fpsteer::Error),
}

impl CliError {
    /// 2 for anything wrong with the input, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Write { .. } | CliError::Numerics(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
