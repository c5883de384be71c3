use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz (max real eigenvalue part {max_real:.3e})")]
    NotHurwitz { max_real: f64 },

    #[error("Kronecker system is numerically singular")]
    SingularSystem,

    #[error("no stabilizing gain found for (A, B)")]
    NotStabilizable,

    #[error("iteration did not converge after {iterations} steps (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{quantity} = {value} is outside the model envelope")]
    OutOfEnvelope { quantity: &'static str, value: f64 },

    #[error("degenerate state: airspeed {0} must be positive")]
    DegenerateState(f64),

    #[error("{quantity} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("trim residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    TrimResidual { residual: f64, tolerance: f64 },

    #[error("Gram matrix is rank deficient and no ridge term was supplied")]
    SingularGram,

    #[error("condition {condition} has {have} records, need at least {need}")]
    InsufficientData { condition: usize, have: usize, need: usize },

    #[error("probability vector is not on the simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },

    #[error("closed-loop matrix lost the Hurwitz property at iteration {iteration}")]
    LostStability { iteration: usize },

    #[error("Lyapunov iterations hit the cap of {iterations} (last change {last_change:.3e})")]
    MaxIterations { iterations: usize, last_change: f64 },

    #[error("integration produced a non-finite state")]
    NonFiniteState,

    #[error("trajectory diverged at t = {t:.2} s: {reason}")]
    DivergedTrajectory { t: f64, reason: String },

    #[error("game solver failed for {periods} consecutive periods at t = {t:.2} s: {reason}")]
    SolverFailure { t: f64, periods: u32, reason: String },

    #[error("logs have different time grids")]
    MismatchedGrids,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the matrix-equation machinery, as opposed to
    /// envelope, data, or I/O problems.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotHurwitz { .. }
                | Error::SingularSystem
                | Error::NotStabilizable
                | Error::NoConvergence { .. }
                | Error::LostStability { .. }
                | Error::MaxIterations { .. }
                | Error::SolverFailure { .. }
        )
    }
}
