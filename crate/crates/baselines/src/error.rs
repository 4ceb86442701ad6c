use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Autodiff(#[from] ssop_autodiff::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Flatten into the engine's error type at Module boundaries.
pub(crate) fn to_autodiff(e: Error) -> ssop_autodiff::Error {
    match e {
        Error::Autodiff(inner) => inner,
        other => ssop_autodiff::Error::invalid("baselines", other.to_string()),
    }
}
