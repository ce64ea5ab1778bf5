use thiserror::Error;

pub type Result<T> = std::result::Result<T, HedgeError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HedgeError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cannot condition on x-index {index}: marginal mass is zero")]
    ConditioningOnNull { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{kind} utility is not defined at {value}")]
    Domain { kind: &'static str, value: f64 },

    #[error("marginal utility {value} is outside the range of {kind} utility")]
    Range { kind: &'static str, value: f64 },

    #[error("FOC domain violation at x-index {index}: {kind} marginal utility undefined")]
    FocDomain { kind: &'static str, index: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("unsupported utility: {0}")]
    UnsupportedUtility(String),

    #[error("measures are not equivalent: {0}")]
    EquivalenceViolation(String),

    #[error("support error: {0}")]
    Support(String),

    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error(
        "allocation components diverge (sup-norm {sup_norm:.3e}) while the hedge sum converges; \
         the joint law probably violates the full-support condition on the product of marginal supports"
    )]
    AllocationUnbounded { sup_norm: f64 },

    #[error("surface is not centred under the product risk-neutral coupling (mean {mean:.3e})")]
    NotCentered { mean: f64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HedgeError {
    fn from(e: std::io::Error) -> Self {
        HedgeError::Io(e.to_string())
    }
}
