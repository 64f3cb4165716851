use thiserror::Error;

pub type Result<T> = std::result::Result<T, GtrError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GtrError {
    #[error("sample is empty")]
    EmptyData,

    #[error("non-finite value in row {row}, column `{column}`")]
    NonFiniteData { row: usize, column: String },

    #[error("invalid knots: {0}")]
    InvalidKnots(String),

    #[error("invalid dictionary specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coefficients outside the effective domain: row {row} has derivative {eta:e}")]
    DomainViolation { row: usize, eta: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("first-step fit did not converge")]
    FirstStepNotConverged,

    #[error("no strictly feasible point for the constraint set: {0}")]
    Infeasible(String),

    #[error("level u = {u} is outside the attainable range ({lo}, {hi}) at this covariate value")]
    LevelUnattainable { u: f64, lo: f64, hi: f64 },

    #[error("covariance matrix is required but the evaluator has none")]
    MissingCovariance,

    #[error("all penalization values excluded for candidate `{0}`")]
    NoAdmissibleLambda(String),

    #[error("infeasible data-generating coefficients: {0}")]
    InfeasibleDgp(String),
}
