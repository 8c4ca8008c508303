use thiserror::Error;

use crate::trigpoly::TrigPoly;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("domain mismatch: expected {expected} measure, got {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("frequency index {k} outside the band |k| <= {fc}")]
    OutOfBand { k: i64, fc: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("corrupted measurements: anti-diagonal inconsistency {inconsistency:.3e} exceeds {threshold:.3e}")]
    CorruptedMeasurements { inconsistency: f64, threshold: f64 },

    #[error("interpolation system is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("dual solver did not converge after {iterations} iterations (kkt residual {residual:.3e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        last_iterate: Box<TrigPoly>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
