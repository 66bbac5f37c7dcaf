use thiserror::Error;

/// Errors raised by the oracle, inner solver, subproblem solvers and drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("yy-block of the Hessian is not negative definite (strong concavity violated)")]
    SingularYYBlock,

    #[error("non-finite value encountered in {0}")]
    NonFiniteIterate(&'static str),

    #[error("invalid accuracy target: {0}")]
    InvalidAccuracy(f64),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("shifted Levenberg-Marquardt system is singular")]
    SingularLMSystem,

    #[error("point lies outside the domain of the objective")]
    OutsideDomain,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
