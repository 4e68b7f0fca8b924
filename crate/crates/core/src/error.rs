use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("capital level index {index} out of range (model has {levels} levels)")]
    LevelOutOfRange { index: usize, levels: usize },

    #[error("gain table has no entry for capital level {level}")]
    MissingGainEntry { level: f64 },

    #[error("x_max must be positive, got {0}")]
    NonPositiveDomain(f64),

    #[error("grid needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("model is not usable: {0}")]
    InvalidModel(String),

    #[error("control field does not match the discretization: {0}")]
    ShapeMismatch(String),

    #[error("inadmissible control {control} at node (l={l}, i={i}): {reason}")]
    InadmissibleControl {
        l: usize,
        i: usize,
        control: &'static str,
        reason: &'static str,
    },

    #[error("factorization broke down at pivot {pivot} (value {value}); the operator is not an M-matrix")]
    SingularFactorization { pivot: usize, value: f64 },

    #[error("value surface is not finite at node (l={l}, i={i})")]
    NonFinite { l: usize, i: usize },

    #[error("simulation start ({x}, level {level}) is outside the grid")]
    StartOutsideGrid { x: f64, level: usize },

    #[error("policy iteration did not converge; refusing to simulate a partial solution")]
    NotConverged,

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
