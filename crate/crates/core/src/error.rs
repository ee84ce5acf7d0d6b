use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time went backwards: {t_new} < {last_update}")]
    NonMonotoneTime { last_update: f64, t_new: f64 },

    #[error("intensity evaluated to a non-finite value ({value}) at t = {time}")]
    NonFiniteIntensity { time: f64, value: f64 },

    #[error("thinning bound {bound} is below the intensity {intensity} at t = {time}")]
    BoundViolated { time: f64, bound: f64, intensity: f64 },

    #[error("categorical weights must be finite, non-negative and not all zero")]
    InvalidWeights,

    #[error("burn-in ended in a liquidity crisis at t = {time}")]
    BurnInCrisis { time: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no metastable barrier: {0}")]
    NoBarrier(String),

    #[error("undefined in the explosive regime: {0}")]
    Explosive(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("malformed event stream: {0}")]
    MalformedStream(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
