use std::path::PathBuf;

use escape_core::{ConfigError, DpeError, GameError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A flag value or config combination the subcommand cannot use.
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Dpe(#[from] DpeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid { key: key.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ReadConfig { .. } | Self::Config(_) | Self::Invalid { .. } | Self::Game(_) => 2,
            Self::Numerical(_) | Self::Dpe(_) | Self::Sim(_) => 3,
            Self::Write { .. } => 1,
        }
    }
}
