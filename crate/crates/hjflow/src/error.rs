use thiserror::Error;

/// Error taxonomy shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("coercivity error: {0}")]
    Coercivity(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("reachability error: {0}")]
    Reachability(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("data incompatibility: {0}")]
    DataIncompatibility(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
