use thiserror::Error;

/// Errors raised by the dynamics, reduction and analysis layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vortices {0} and {1} coincide")]
    Collision(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("momentum {found:?} differs from the reduction value {expected:?} (residual {residual:e})")]
    MomentumMismatch {
        expected: [f64; 3],
        found: [f64; 3],
        residual: f64,
    },

    #[error("outer vortices do not sum to zero after centering (residual {0:e})")]
    CentroidResidual(f64),

    #[error("sphere point w3 = {0} is too close to the north pole for the v1 = 0 section")]
    NearNorthPole(f64),

    #[error("point is within {threshold:e} of a collision state (min l = {min_l:e})")]
    NearCollision { min_l: f64, threshold: f64 },

    #[error("invariant relation violated (residual {residual:e}, p4 = {p4})")]
    RelationViolation { residual: f64, p4: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("maximum number of steps ({0}) reached")]
    TooManySteps(usize),

    #[error("degenerate Hessian at critical point (eigenvalues {0:?})")]
    DegenerateHessian([f64; 2]),

    #[error("orbit did not close before t = {0}")]
    NoReturn(f64),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
