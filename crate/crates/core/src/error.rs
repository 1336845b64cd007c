use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{operand}`: expected {expected}, found {found}")]
    DimensionMismatch {
        operand: String,
        expected: String,
        found: String,
    },

    #[error("invalid system model: `{field}` {reason}")]
    InvalidModel { field: &'static str, reason: String },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("invalid pulse {index}: {reason}")]
    InvalidPulse { index: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical abort at step {step} (t = {t}): {reason}")]
    NumericalAbort { step: usize, t: f64, reason: String },

    #[error("jump at vanishing rate: rate {rate:e} at t = {t}")]
    JumpAtVanishingRate { t: f64, rate: f64 },

    #[error("replay record has {found} entries, run needs {expected}")]
    ReplayLength { expected: usize, found: usize },

    #[error("{failed} of {total} trajectories aborted (limit is 1%)")]
    EnsembleFailed { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn dims(operand: impl Into<String>, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            operand: operand.into(),
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }
}
