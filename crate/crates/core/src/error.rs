use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An integer argument outside the supported range.
    #[error("{what} = {value} is outside the supported range (limit {limit})")]
    Range {
        what: &'static str,
        value: u64,
        limit: u64,
    },

    /// Malformed or mismatched argument.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Collision count exceeded the configured leaf cap.
    #[error("collision count {nu} exceeds cap {cap} at t = {t}")]
    CollisionCap { nu: u64, cap: u64, t: f64 },

    /// A batch chunk failed; wraps the underlying error.
    #[error("chunk {chunk}: {source}")]
    Chunk {
        chunk: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical instability at step {step} (t = {t}): |phi| = {modulus}")]
    Instability { step: usize, t: f64, modulus: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
