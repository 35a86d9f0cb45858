use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A statistic is mathematically undefined for the given data.
    #[error("undefined: {0}")]
    Undefined(String),

    /// Malformed input file; `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    /// A stored artifact does not fit the data or this version of the code.
    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }
}
