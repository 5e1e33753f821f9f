use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is not finite at cell {cell}")]
    NonFinite { cell: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid norm exponent: {0}")]
    InvalidExponent(String),

    #[error("density is negative at cell {cell} (value {value})")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("time step {dt} violates the transport CFL bound (outflow fraction {fraction} > 1 at cell {cell})")]
    CflViolation { dt: f64, fraction: f64, cell: usize },

    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("coefficient constraint violated: {0}")]
    Coefficient(String),

    #[error("inadmissible test function `{label}`: {reason}")]
    InadmissibleTestFunction { label: String, reason: String },

    #[error("unknown manufactured pair kind `{0}`")]
    UnknownKind(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty time window: T_k = {t_k} is not below the final time {t_final}")]
    EmptyWindow { t_k: f64, t_final: f64 },

    #[error("level {k} is outside the schedule (kmax = {kmax})")]
    LevelOutOfRange { k: usize, kmax: usize },

    #[error("trajectory is empty")]
    EmptyTrajectory,
}

pub type Result<T> = std::result::Result<T, Error>;
