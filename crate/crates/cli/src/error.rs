use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nonrecip_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} panel(s) failed")]
    PanelsFailed(usize),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNATTAINABLE_DRIVE: i32 = 2;
pub const EXIT_ROOT_FINDING: i32 = 3;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(nonrecip_core::Error::UnattainableDrive { .. }) => EXIT_UNATTAINABLE_DRIVE,
            CliError::Core(nonrecip_core::Error::RootFinding(_)) => EXIT_ROOT_FINDING,
            _ => EXIT_FAILURE,
        }
    }
}
