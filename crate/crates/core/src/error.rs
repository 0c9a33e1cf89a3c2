use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The document is not well-formed for the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// The document parsed but violates a semantic constraint.
    #[error("validation error: {0}")]
    Validation(String),

    /// A knowledge update produced the empty set.
    #[error("inconsistent observation: block {block} cannot follow the current knowledge")]
    InconsistentObservation { block: usize },

    #[error("resource limit exceeded: {what} ({reached} > {limit})")]
    ResourceLimit {
        what: &'static str,
        limit: u128,
        reached: u128,
    },

    #[error("knowledge set is not closed: {0}")]
    NotClosed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
