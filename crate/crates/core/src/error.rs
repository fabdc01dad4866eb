use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A computation hit its iteration or horizon cap before converging.
    /// `partial` carries the best value available at the cap.
    #[error("resource limit reached: {what} (partial value {partial})")]
    ResourceLimit { what: String, partial: f64 },

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
