use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size guard exceeded: {what} needs {needed}, limit {limit}")]
    Guard {
        what: String,
        needed: u128,
        limit: u128,
    },

    #[error("unsupported region: {0}")]
    Unsupported(String),

    #[error("precondition `{anchor}` violated: {message}")]
    Precondition {
        anchor: &'static str,
        message: String,
    },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("no certified path in {attempts} attempts (best cost {best_cost})")]
    CertificateSearch {
        attempts: u32,
        best_cost: f64,
        best: Box<crate::walks::PathCertificate>,
    },

    #[error("good-object search exhausted at n={n} for {class}: {observed}")]
    GoodSearch {
        n: usize,
        class: String,
        observed: String,
    },
}

impl CoreError {
    pub fn guard(what: impl Into<String>, needed: u128, limit: u128) -> CoreError {
        CoreError::Guard {
            what: what.into(),
            needed,
            limit,
        }
    }

    pub fn pre(anchor: &'static str, message: impl Into<String>) -> CoreError {
        CoreError::Precondition {
            anchor,
            message: message.into(),
        }
    }
}
