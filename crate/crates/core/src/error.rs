use thiserror::Error;

/// Errors raised by the geometry, channel and conflict-management primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("positions coincide; relative direction is undefined")]
    CoincidentPositions,
    #[error("time-to-collision must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("time {t} s is outside the plan span [{start}, {end}] s")]
    OutsidePlan { t: f64, start: f64, end: f64 },
    #[error("invalid flight plan: {0}")]
    InvalidPlan(String),
    #[error("invalid separation volume: {0}")]
    InvalidVolume(String),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid path-loss model: {0}")]
    InvalidModel(String),
    #[error("regression is singular: {0}")]
    SingularFit(String),
    #[error("{0} is not a conflict layer")]
    NotAConflictLayer(&'static str),
    #[error("beacon coordinate {axis}={value} m is outside the encodable range")]
    CoordinateOutOfRange { axis: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no conflict-free resolution for drones {a} and {b}")]
    NoResolution { a: u32, b: u32 },
    #[error("scenario is invalid: {0}")]
    InvalidScenario(String),
    #[error("plans of drones {a} and {b} cannot be deconflicted within the delay/offset bounds")]
    Unresolvable { a: u32, b: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
