use thiserror::Error;

/// Errors shared across the simulation and analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix required to be invertible is singular or too ill-conditioned.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Operation requires at least one sensing slot but the session has none.
    #[error("no observation: the session has zero sensing slots")]
    NoObservation,

    /// Problem size exceeds what an exhaustive oracle can enumerate.
    #[error("capability exceeded: {0}")]
    CapabilityExceeded(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
