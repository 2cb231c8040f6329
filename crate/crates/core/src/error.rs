use std::path::PathBuf;

use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step size underflow at t={t} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("right-hand side returned a non-finite value at t={t}")]
    NonFiniteRhs { t: f64 },

    #[error("step budget of {0} exhausted")]
    StepBudget(usize),

    #[error("no sign change on [{lo}, {hi}] (f(lo)={f_lo:e}, f(hi)={f_hi:e})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("singular pivot at row {row} ({pivot:e})")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("half-line problem has no solution for c={c}: {reason}")]
    ExistenceViolation { c: f64, reason: String },

    #[error("speed c={c} outside the admissible interval ({lo}, {hi})")]
    DomainViolation { c: f64, lo: f64, hi: f64 },

    #[error("interface relation does not change sign: residual(lo)={r_lo:e}, residual(hi)={r_hi:e}")]
    BracketFailure { r_lo: f64, r_hi: f64 },

    #[error("Newton stalled at iteration {iteration} with residual {residual:e}")]
    NewtonStall { iteration: usize, residual: f64 },

    #[error("converged wave is not monotone: {0}")]
    MonotonicityViolation(String),

    #[error("state left [0,1] at t={time}: {species}={value:e}")]
    StabilityViolation { time: f64, species: &'static str, value: f64 },

    #[error("no level crossing at t={time}")]
    FrontLost { time: f64 },

    #[error("species ordering assumption violated: k2*a2/r2^2={lhs} < k1*a1/r1^2={rhs}; swap the species labels")]
    AssumptionViolation { lhs: f64, rhs: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for parameter/validation problems (as opposed to solver failures).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::AssumptionViolation { .. }
                | Error::DomainViolation { .. }
                | Error::ExistenceViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
