use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::Functional;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fixed-point iteration stopped after {iterations} iterations with residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("matrix is singular to working precision at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("constraint jacobian is rank deficient: row {row} depends on the preceding rows")]
    RankDeficient { row: usize },
    #[error("quadratic subproblem is infeasible; violated inequality constraints {violated:?}")]
    Infeasible { violated: Vec<usize> },
    #[error("active-set iteration exceeded {limit} working-set changes")]
    Cycling { limit: usize },
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("adjoint was computed for {computed:?} but {requested:?} was requested")]
    StaleAdjoint {
        computed: Functional,
        requested: Functional,
    },
    #[error("no adjoint supplied for state-dependent {0:?}")]
    MissingAdjoint(Functional),
    #[error("invalid smoothing weights: {0}")]
    InvalidWeights(String),
    #[error("problem size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("regularization ladder exhausted without a positive definite matrix")]
    RegularizationExhausted,
    #[error("diverged at outer iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },
    #[error("at iteration {iteration}: {error}")]
    AtIteration { iteration: usize, error: Box<Error> },
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
}

impl Error {
    pub(crate) fn at(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            error: Box::new(self),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
