use thiserror::Error;

/// Errors raised across the simulator, learners and evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in `{field}` at t = {t} min")]
    NonFinite { field: &'static str, t: f64 },

    #[error("simulation diverged at t = {t} min: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("controller requested a negative dose of {amount} U at t = {t} min")]
    NegativeDose { t: f64, amount: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite {what} after {step} optimiser steps")]
    NonFiniteLoss { what: &'static str, step: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("cohort screen failed: {0}")]
    Screen(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
