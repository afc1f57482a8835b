use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density {value:e} at index {index} outside the admissible band ({lower:e}, {upper:e})")]
    DensityOutOfBand {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("distribution has zero mass")]
    ZeroMass,

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("time step underflow at t = {t}: dt = {dt:e} fell below dt_min = {dt_min:e}")]
    DtUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("steady state not reached after {steps} steps (mu spread {mu_spread:e}, max |rhs| {rhs_max:e})")]
    NotConverged {
        steps: usize,
        mu_spread: f64,
        rhs_max: f64,
    },

    #[error("unresolved phase jump of {jump:.3} rad at grid point {index}")]
    PhaseAmbiguity { index: usize, jump: f64 },

    #[error("orbital norm drift {drift:e} exceeds the per-step limit")]
    NormDrift { drift: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical engines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DensityOutOfBand { .. }
                | Error::DtUnderflow { .. }
                | Error::NotConverged { .. }
                | Error::PhaseAmbiguity { .. }
                | Error::NormDrift { .. }
                | Error::NonFinite { .. }
        )
    }
}
