#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Autodiff(#[from] ssop_autodiff::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn from_autodiff(e: ssop_autodiff::Error) -> Self {
        Error::Autodiff(e)
    }
}
