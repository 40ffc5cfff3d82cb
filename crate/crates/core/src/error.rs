use thiserror::Error;

/// Errors raised by the verification toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("phase {phase} out of range for dimension {n}: |phase| must be below n*pi/2")]
    PhaseOutOfRange { n: usize, phase: f64 },

    #[error("phase {phase} outside the semi-convex regime (-(n-2)pi/2, pi/2) for n = {n}")]
    RegimeViolation { n: usize, phase: f64 },

    #[error("inapplicable input: {0}")]
    Inapplicable(String),

    #[error("rotation out of range: {0}")]
    RotationOutOfRange(String),

    #[error("grid has insufficient margin: {0}")]
    InsufficientMargin(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("point {point:?} outside domain: {reason}")]
    OutsideDomain { point: Vec<f64>, reason: String },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn inapplicable(msg: impl Into<String>) -> Self {
        Error::Inapplicable(msg.into())
    }

    pub(crate) fn outside(point: &[f64], reason: impl Into<String>) -> Self {
        Error::OutsideDomain {
            point: point.to_vec(),
            reason: reason.into(),
        }
    }
}
