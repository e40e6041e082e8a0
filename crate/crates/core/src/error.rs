use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or point lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degree {degree} exceeds the maximum degree {max}")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("derivative order {0} is not supported (only 0, 1 and 2)")]
    UnsupportedOrder(usize),

    /// Mismatched resolutions or vector lengths.
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// Non-finite samples or otherwise unusable input data.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A coefficient that must be positive (a or c) is not.
    #[error("coefficient {name} must be positive, found {value} at x = {x}")]
    CoefficientSign {
        name: &'static str,
        x: f64,
        value: f64,
    },

    /// A coefficient expression failed or produced a non-finite value at a node.
    #[error("evaluation of {name} failed at x = {x}: {message}")]
    Evaluation {
        name: &'static str,
        x: f64,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("solution diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("every run of the study diverged")]
    AllRunsDiverged,

    #[error("need at least 3 finite positive error values, found {usable}")]
    InsufficientData { usable: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
