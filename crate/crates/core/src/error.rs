use thiserror::Error;

/// Errors surfaced by the numeric layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("not positive definite")]
    NotPositiveDefinite,
    #[error("empty index set")]
    EmptyIndexSet,
    #[error("index out of range")]
    IndexOutOfRange,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular update (g = -1)")]
    SingularUpdate,
    #[error("matrix is not rank one")]
    NotRankOne,
    #[error("Toeplitz structure violation")]
    NotToeplitz,
    #[error("weight function must be nonnegative")]
    NegativeWeight,
    #[error("integrand not finite at sample")]
    NonFiniteIntegrand,
    #[error("subset enumeration cap exceeded")]
    SubsetCapExceeded,
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error("missing scenario field: {0}")]
    MissingScenarioField(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
