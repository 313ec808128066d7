use thiserror::Error;

/// Errors raised by the identification library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration field violates its invariant.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// The parameter schedule is malformed.
    #[error("invalid parameter schedule: {0}")]
    InvalidSchedule(String),

    /// A regressor sample was NaN or infinite.
    #[error("non-finite regressor value {value}")]
    NonFiniteRegressor { value: f64 },

    /// The simulation produced a NaN or infinity.
    #[error("non-finite value in channel `{channel}` at t = {t}")]
    NonFinite { channel: String, t: f64 },

    /// A filter reset was requested at a time that is not a reset event.
    #[error("reset requested at t = {t}, which is not a reset event")]
    NotAResetEvent { t: f64 },

    /// A filter reset was requested after the final reset at T+.
    #[error("reset requested at t = {t} after the final reset")]
    ResetAfterFinal { t: f64 },

    /// An analysis interval is empty or inverted.
    #[error("empty interval [{start}, {end}]")]
    EmptyInterval { start: f64, end: f64 },

    /// An analysis interval extends outside the trajectory grid.
    #[error("interval [{start}, {end}] lies outside the trajectory grid")]
    OutsideGrid { start: f64, end: f64 },

    /// The regressor never rises above the normalization floor.
    #[error("regressor never excited above floor (eta_min = {eta_min})")]
    NeverExcited { eta_min: f64 },

    /// A channel length does not match the grid.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// An envelope check is missing one of its parameters.
    #[error("envelope {envelope}: missing parameter `{parameter}`")]
    MissingEnvelopeParameter {
        envelope: &'static str,
        parameter: &'static str,
    },

    /// Verdict and expectation lists do not describe the same intervals.
    #[error("interval mismatch at row {row}: {reason}")]
    IntervalMismatch { row: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
