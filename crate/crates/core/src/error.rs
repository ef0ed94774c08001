use thiserror::Error;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Domain,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("{0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error estimate {error:e} after {panels} panels"
    )]
    Accuracy {
        estimate: f64,
        error: f64,
        panels: usize,
    },

    #[error("root bracketing failed for {what}: bracket [{lo:e}, {hi:e}] with values [{f_lo:e}, {f_hi:e}]")]
    Bracket {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::Domain(_)
            | Error::Configuration(_)
            | Error::Factorization(_)
            | Error::Json(_) => ErrorKind::Domain,
            Error::Accuracy { .. } | Error::Bracket { .. } | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Error {
    Error::param(field, reason)
}
