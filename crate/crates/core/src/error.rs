use thiserror::Error;

/// Default bound on the number of group elements a single enumeration may produce.
pub const DEFAULT_CAP: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_CAP`].
pub const CAP_ENV: &str = "CUTOFFLAB_CAP";

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: enumeration would produce more than {cap} elements")]
    Capacity { cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Enumeration cap from the environment, falling back to [`DEFAULT_CAP`].
pub fn cap_from_env() -> usize {
    std::env::var(CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP)
}
