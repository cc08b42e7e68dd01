use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid data model: {0}")]
    InvalidModel(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// The observed noisy sequence has zero probability under the model.
    #[error("impossible observation: {0}")]
    ImpossibleObservation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
