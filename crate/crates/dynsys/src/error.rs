use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its physical or structural range.
    #[error("{0}")]
    Domain(String),

    /// Integration or sampling produced a non-finite value.
    #[error("non-finite value in {what} at index {index}")]
    Numeric { what: &'static str, index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Dataset file violates the on-disk format.
    #[error("dataset format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
