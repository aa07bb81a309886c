use thiserror::Error;

/// Errors raised by the library. Terminal protocol outcomes such as "not purifiable"
/// are reported on the result value, not here.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EppError {
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    TraceNotOne(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("gate is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("state is not an X-state (largest off-block entry {0:e})")]
    NotXState(f64),
    #[error("branch probability {0:e} is below the degeneracy threshold")]
    DegenerateBranch(f64),
    #[error("{name} = {value} is outside {domain}")]
    Domain { name: &'static str, value: f64, domain: &'static str },
    #[error("problem size {0} exceeds the limit {1}")]
    SizeExceeded(u128, u128),
    #[error("malformed state file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, EppError>;

pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> EppError {
    EppError::Domain { name, value, domain }
}
