use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A training or evaluation setting is out of range.
    #[error("{0}")]
    Config(String),

    /// The requested operation is undefined for this model family.
    #[error("capability: {0}")]
    Capability(String),

    #[error(transparent)]
    Autodiff(#[from] ssop_autodiff::Error),

    #[error(transparent)]
    Ssm(#[from] ssop_ssm::Error),

    #[error(transparent)]
    Baseline(#[from] ssop_baselines::Error),

    #[error(transparent)]
    Data(#[from] ssop_dynsys::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
