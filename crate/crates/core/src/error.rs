use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A query reached past the part of a spectrum that is known to be complete.
    #[error("trust region violated: {requested} exceeds lambda_trust {trust}")]
    Trust { requested: f64, trust: f64 },

    /// A time window leaks out of the interval where the trace is localized.
    #[error("window support violated: {0}")]
    WindowSupport(String),

    #[error("non-finite evaluation at t = {t}")]
    NonFinite { t: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("classification failed: {converged} of {total} starts converged")]
    Classification { converged: usize, total: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
