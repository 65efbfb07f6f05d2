use thiserror::Error;

pub type Result<T> = std::result::Result<T, MambaError>;

#[derive(Debug, Error)]
pub enum MambaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("construction infeasible after searching {searched} candidates: {reason}")]
    ConstructionInfeasible { searched: usize, reason: String },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("optimizer step rejected: {0}")]
    RejectedStep(String),

    #[error("environment fault: {0}")]
    Environment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MambaError::InvalidArgument(msg.into()))
}
