use std::fmt;

use thiserror::Error;

/// Which estimate failed when a solve is refused for too large an `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// `eps` exceeds the configured solver cap.
    Cap,
    /// The linear part could not be bracketed.
    Gamma,
    /// The Picard iteration stopped contracting.
    Contraction,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Cap => write!(f, "solver cap"),
            Stage::Gamma => write!(f, "gamma bracket"),
            Stage::Contraction => write!(f, "Picard contraction"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("mortality model rejected at z = {z}: {reason}")]
    Mortality { z: f64, reason: String },

    #[error("compatibility violated at z = {z}: log argument {value} is not positive")]
    Compatibility { z: f64, value: f64 },

    #[error("nonzero slope at origin ({slope:e}): the dilation series diverges")]
    NonzeroSlope { slope: f64 },

    #[error("epsilon above contraction threshold (eps = {eps}, stage: {stage})")]
    EpsilonTooLarge { eps: f64, stage: Stage },

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, trace: Vec<f64> },

    #[error("unstable time step: {0}")]
    Stability(String),
}

pub type Result<T> = std::result::Result<T, Error>;
