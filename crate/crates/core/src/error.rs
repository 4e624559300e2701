use thiserror::Error;

/// Errors raised by construction and computation.
///
/// `Resource` is the only variant that signals "input too large for the
/// configured caps" rather than "input wrong"; callers that map errors to
/// exit codes rely on this distinction.
#[derive(Debug, Error)]
pub enum Error {
    /// Two values built over different group specifications were combined.
    #[error("group spec mismatch: {0}")]
    SpecMismatch(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The transition set of the incidence matrix is not a subgroup.
    #[error("not a subgroup: {0}")]
    NotASubgroup(String),

    /// Some row or column of the incidence matrix is empty.
    #[error("non-surjective incidence matrix: {0}")]
    NonSurjective(String),

    /// The incidence matrix is not irreducible.
    #[error("not irreducible: {0}")]
    NotIrreducible(String),

    /// The transition matrix is not supported exactly on the allowed edges.
    #[error("measure incompatible with incidence matrix: {0}")]
    Compatibility(String),

    /// A numeric validation check failed (stochasticity, stationarity, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A parameter violates a documented precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The request exceeds a configured work or enumeration cap.
    #[error("resource cap exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
