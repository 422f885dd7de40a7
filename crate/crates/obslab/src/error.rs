//! Shared error type for all laboratory modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("separation violated at level {level}: 2*c_{{k+1}} >= c_k")]
    Separation { level: usize },
    #[error("quadrature tolerance unreachable: {0}")]
    Quadrature(String),
    #[error("cover verification failed: {0} uncovered sublevel points")]
    CoverageFailure(usize),
    #[error("degenerate set: {0}")]
    DegenerateSet(String),
    #[error("empty spectral space: lambda = {lambda} below ({pi_over_l})^2")]
    EmptySpace { lambda: f64, pi_over_l: f64 },
    #[error("growth bound violated: {0}")]
    BoundViolation(String),
    #[error("bad-cell mass exceeds half the squared amalgam norm ({frac})")]
    MassViolation { frac: f64 },
    #[error("zero observation: denominator underflow")]
    ZeroObservation,
    #[error("parameter error: {0}")]
    Param(String),
    #[error("no root in bracket: {0}")]
    NoRoot(String),
    #[error("no feasible schedule index up to n_max = {0}")]
    NoFeasibleN(usize),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
