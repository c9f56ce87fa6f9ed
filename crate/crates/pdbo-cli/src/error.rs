use std::path::PathBuf;

use thiserror::Error;

/// Exit codes of the `pdbo` binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error: {0}")]
    InvalidSetup(#[source] pdbo_core::Error),
    #[error("solver error ({method}, seed {seed}): {source}")]
    Solver {
        method: String,
        seed: u64,
        #[source]
        source: pdbo_core::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::InvalidSetup(_) => EXIT_CONFIG,
            CliError::ChecksFailed(_) => EXIT_CHECK_FAILED,
            CliError::Solver { .. } | CliError::Io { .. } | CliError::Format { .. } => EXIT_RUNTIME,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<pdbo_core::Error> for CliError {
    fn from(e: pdbo_core::Error) -> Self {
        CliError::InvalidSetup(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
