use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {0}: expected a power of two in [8, 2^22]")]
    GridSize(usize),

    #[error("expected a real-valued boundary function")]
    NotReal,

    #[error("length mismatch: grid has {expected} points, got {got}")]
    Length { expected: usize, got: usize },

    #[error("point with modulus {modulus} lies outside the admissible disk |z| <= {limit}")]
    Domain { modulus: f64, limit: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },

    #[error("path {index} did not exit within {max_steps} steps")]
    MaxSteps { index: u64, max_steps: u64 },

    #[error("{discarded} of {total} paths exceeded the step budget")]
    TooManyDiscarded { discarded: usize, total: usize },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("bound violated beyond tolerance: {0}")]
    Bound(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            name,
            reason: reason.into(),
        }
    }
}
