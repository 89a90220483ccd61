use thiserror::Error;

/// Errors produced by the library surface.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid simplex vector: {0}")]
    InvalidSimplex(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arm index {arm} out of range for {d} arms")]
    ArmOutOfRange { arm: usize, d: usize },

    #[error("significance level u must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("intensity {value} at t = {t} exceeds the dominating rate {lambda_max}")]
    DominanceViolated { t: f64, value: f64, lambda_max: f64 },

    #[error("invalid intensity specification: {0}")]
    InvalidIntensity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(u))
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
