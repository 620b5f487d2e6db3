use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] degradesched_core::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    /// 2 for bad input, 1 for runtime and solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Write { .. } => 1,
            CliError::Read { .. } | CliError::Format { .. } | CliError::Usage(_) => 2,
        }
    }
}
