use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Internal(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Missing(String),
    #[error("config error: {0}")]
    Config(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Io(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<action_shapley::Error> for CliError {
    fn from(e: action_shapley::Error) -> Self {
        use action_shapley::Error as E;
        match e {
            E::Io { .. } | E::StoreCorrupt { .. } => CliError::Io(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}
