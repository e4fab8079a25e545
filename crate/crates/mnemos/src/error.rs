use thiserror::Error;

/// Unified error type for the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller or backend violated a documented contract (bad dimension,
    /// malformed response shape, out-of-range parameter).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A referenced entity (slot id, keyword, arm name) does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// A remote backend failed after the configured retries.
    #[error("backend error: {0}")]
    Backend(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }

    pub fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }

    pub fn backend(msg: impl Into<String>) -> Self {
        Error::Backend(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
