//! Error type for the runner, carrying the process exit code.

use std::path::{Path, PathBuf};

/// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {detail}", path = path.display())]
    BadFile { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::BadFile { .. } => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn bad_file(path: &Path, detail: impl Into<String>) -> Self {
        CliError::BadFile {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }
}

impl From<dice_core::Error> for CliError {
    fn from(e: dice_core::Error) -> Self {
        use dice_core::Error as E;
        match e {
            // Rejected inputs are configuration problems; anything that
            // breaks after validation is a numerical failure.
            E::InvalidConfig(_) | E::InvalidPattern(_) | E::InvalidSchedule(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}
