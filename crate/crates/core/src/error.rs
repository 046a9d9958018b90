use thiserror::Error;

use crate::model::ValidationReport;
use crate::scalar::Rational;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),
    #[error("negative fraction {value} for state {state}")]
    NegativeFraction { state: usize, value: Rational },
    #[error("fractions sum to {0}, expected 1")]
    FractionSum(Rational),
    #[error("initial counts sum to {got}, expected {expected}")]
    CountSum { got: u64, expected: u64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("arm count must be positive")]
    NoArms,
    #[error("truncation horizon must be at least 1")]
    InvalidTruncation,
    #[error("budget fraction {0} outside [0, 1]")]
    BudgetOutOfRange(String),
    #[error("linear program is infeasible (internal error)")]
    Infeasible,
    #[error("linear program is unbounded (internal error)")]
    Unbounded,
    #[error("simplex lost numerical accuracy: {0}")]
    NumericalFailure(String),
    #[error("simplex aborted after {0} iterations")]
    CyclingAborted(usize),
    #[error("budget {budget} exceeds arm count {arms}")]
    BudgetExceedsArms { budget: u64, arms: u64 },
    #[error("model is not indexable; Whittle indices are undefined")]
    NotIndexable,
    #[error("infeasible pulls: {0}")]
    InfeasiblePulls(String),
    #[error("count space too large: {size} exceeds guard {limit}")]
    SizeGuard { size: u128, limit: u128 },
    #[error("parameter window violated: {0}")]
    WindowViolated(String),
    #[error("integrality violated: {0}")]
    Integrality(String),
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("stage {stage} failed: {cause}")]
    Stage { stage: &'static str, cause: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            cause: Box::new(self),
        }
    }

    /// True for failures caused by invalid user input rather than runtime state.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidModel(_)
            | Error::NegativeFraction { .. }
            | Error::FractionSum(_)
            | Error::CountSum { .. }
            | Error::Dimension(_)
            | Error::NoArms
            | Error::InvalidTruncation
            | Error::BudgetOutOfRange(_)
            | Error::BudgetExceedsArms { .. }
            | Error::WindowViolated(_)
            | Error::Integrality(_)
            | Error::UnknownExperiment(_)
            | Error::SizeGuard { .. }
            | Error::NotIndexable
            | Error::Parse(_) => true,
            Error::Stage { cause, .. } => cause.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
