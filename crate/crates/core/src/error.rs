use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("system matrix is not positive definite (pivot {0})")]
    Singular(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need {needed} nonzero training columns, found {found}")]
    NotEnoughColumns { needed: usize, found: usize },

    #[error("every atom has an empty support in iteration {0}")]
    AllSupportsEmpty(usize),

    #[error("image is {width}x{height}, smaller than the required {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("image format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
