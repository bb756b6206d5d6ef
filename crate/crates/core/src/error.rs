use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid datum: {0}")]
    InvalidDatum(String),

    #[error("degree bound violated: {0}")]
    DegreeBound(String),

    #[error("orbifold condition violated: n*lambda = {0:?} is not integral")]
    OrbifoldCondition(Vec<f64>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-uniform sample grid: {0}")]
    NonUniformGrid(String),

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("linearization is not coercive (CG stagnated at relative residual {residual:e})")]
    NonCoercive { residual: f64 },

    #[error("newton diverged at iteration {iteration}: residual {residual:e} did not decrease under minimal damping")]
    Diverged { iteration: usize, residual: f64 },

    #[error("heat flow time step underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("symmetry violation: defect {0:e} above tolerance")]
    Symmetry(f64),

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
