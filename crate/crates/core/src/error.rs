use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("unknown link {id} referenced in {context}")]
    UnknownLink { id: i64, context: String },

    #[error("duplicate link id {0}")]
    DuplicateLink(i64),

    #[error("invalid network: {0}")]
    Invalid(ValidationReport),

    #[error("size mismatch: expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("{what} must lie in {range}, got {value} (link {link})")]
    OutOfRange {
        what: &'static str,
        range: &'static str,
        value: f64,
        link: usize,
    },

    #[error("dual variable of link {link} must be positive, got {value}")]
    NonPositiveLambda { link: usize, value: f64 },

    #[error("age of link {link} diverges (gamma * f = 0)")]
    DivergentAge { link: usize },

    #[error("non-finite dual variable for link {link} at frame {frame}; step size too large?")]
    NonFinite { frame: usize, link: usize },

    #[error("conflict graph is not a single collision domain (links {a} and {b} do not interfere)")]
    NotCollisionDomain { a: i64, b: i64 },

    #[error("instance has {links} links; exhaustive search is limited to {limit}")]
    InstanceTooLarge { links: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}
