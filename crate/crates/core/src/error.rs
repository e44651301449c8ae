use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("slice type {0} has an all-zero cost vector; the feasibility region is unbounded")]
    UnboundedRegion(usize),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("queue diverges: workload {rho} >= 1")]
    DivergentQueue { rho: f64 },

    #[error("series did not converge within {max_terms} terms")]
    Truncation { max_terms: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("strategy fingerprint {found} does not match scenario fingerprint {expected}")]
    FingerprintMismatch { expected: String, found: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DivergentQueue { .. } | Error::Truncation { .. } | Error::Numeric(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
