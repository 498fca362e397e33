use thiserror::Error;

use crate::interval::Interval;

/// Everything that can go wrong while building an enclosure or a certificate.
///
/// Failures of numerical verification are never reported as a disproof: a
/// variant here means "could not certify", nothing stronger.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("division by an interval containing zero: {0}")]
    DivisionByZeroInterval(Interval),

    #[error("{function} is undefined on {arg}")]
    DomainError {
        function: &'static str,
        arg: Interval,
    },

    #[error("cannot parse `{0}` as a decimal number")]
    ParseDecimal(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("could not verify invertibility of the interval matrix")]
    SingularEnclosure,

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("rate order violated: {0}")]
    RateOrderViolation(String),

    #[error("cone conditions not verified: {0}")]
    UnverifiedCones(String),

    #[error("graph transform lost resolution: {0}")]
    ResolutionError(String),

    #[error("enclosure failure: {0}")]
    EnclosureFailure(String),

    #[error("section crossing is not certified transversal: {0}")]
    TransversalityFailure(String),

    #[error("no certified section crossing: {0}")]
    LostCrossing(String),

    #[error("collision singularity: distance to a primary encloses {0}")]
    CollisionSingularity(Interval),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
