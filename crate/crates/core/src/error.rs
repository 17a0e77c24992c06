use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The stochastic exponential is only defined (and positive) while every
    /// jump of the integrator stays strictly above -1.
    #[error("jump of size {jump} at node {node} (t = {time}) is <= -1; all jumps must exceed -1")]
    JumpAtOrBelowMinusOne { node: usize, time: f64, jump: f64 },

    #[error("internal consistency violation: {0}")]
    Inconsistency(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("moment condition violated: {0}")]
    MomentCondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Reject NaN and infinities up front; TOML happily parses both.
pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{value} is not finite")))
    }
}
