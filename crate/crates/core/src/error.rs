use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 4 cells, got {0}")]
    GridTooSmall(usize),

    #[error("invalid density spec `{spec}`: {reason}")]
    DensitySpec { spec: String, reason: String },

    #[error("placement mismatch: expected {expected}, got {found}")]
    Placement {
        expected: &'static str,
        found: &'static str,
    },

    #[error("grid mismatch: {0} cells vs {1} cells")]
    GridMismatch(usize, usize),

    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),

    #[error("initial mass {0} differs from 1")]
    MassMismatch(f64),

    #[error("density must be nonnegative (min {0})")]
    NegativeDensity(f64),

    #[error("weight must be strictly positive (min {0})")]
    NonPositiveWeight(f64),

    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    #[error("drift breakpoints [{start}, {end}] do not cover [0, {horizon}]")]
    DriftCoverage { start: f64, end: f64, horizon: f64 },

    #[error("drift is undefined at t = {0}")]
    DriftUndefined(f64),

    #[error("spectral gap must be positive, got {0}")]
    NonPositiveGap(f64),

    #[error("eigen-solver failed: {0}")]
    Eigen(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
