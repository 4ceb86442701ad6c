use std::path::PathBuf;
use thiserror::Error;

/// Failure modes mapped onto the process exit codes:
/// 0 success, 1 usage or config, 2 overwrite refused, 3 missing input,
/// 4 divergence-terminated.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("refusing to overwrite {0} (pass --force to replace it)")]
    OverwriteRefused(PathBuf),

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("training diverged for seed(s) {0:?}; partial metrics were written")]
    Diverged(Vec<u64>),

    #[error(transparent)]
    Train(#[from] ssop_train::Error),

    #[error(transparent)]
    Data(#[from] ssop_dynsys::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Train(_) | CliError::Data(_) | CliError::Io(_) => 1,
            CliError::OverwriteRefused(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
