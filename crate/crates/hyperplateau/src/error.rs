use thiserror::Error;

use crate::symfunc::ConeLabel;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("inadmissible data: {msg} (cone: {label:?})")]
    Inadmissible { msg: String, label: ConeLabel },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate eigenvalue gap: {0}")]
    DegenerateGap(String),

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("level set is not regular: {0}")]
    Regularity(String),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient stencil at node ({0}, {1})")]
    Stencil(usize, usize),

    #[error("parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },

    #[error("linear system is singular at elimination step {0}")]
    SingularSystem(usize),

    #[error("Newton iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("monitor margin violated: {0}")]
    MarginViolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
