use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("malformed sign tree: {0}")]
    MalformedSignTree(String),

    #[error("malformed frame tree: {0}")]
    MalformedFrameTree(String),

    #[error("{what}: size 2^{bits} exceeds the limit 2^{limit}")]
    TooLarge { what: &'static str, bits: u32, limit: u32 },

    #[error("bound {0} is not attained by any vertex")]
    BoundNotAttained(f64),

    #[error("catalog: {0}")]
    Catalog(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Enumeration-guard refusals, reported separately from ordinary validation failures.
    pub fn is_guard_refusal(&self) -> bool {
        matches!(self, Error::TooLarge { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
