use thiserror::Error;

/// Errors raised by the core routines.
///
/// Wire indices carried by variants are 1-based, matching the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {matrix}: {reason}")]
    Validation { matrix: String, reason: String },

    #[error("non-physical bundle: {matrix} has non-positive eigenvalue {value:e}")]
    NonPhysical { matrix: &'static str, value: f64 },

    #[error(
        "non-realizable coupling between wires {i} and {j}: admittance {value:e} S needs a negative resistor"
    )]
    NonRealizable { i: usize, j: usize, value: f64 },

    #[error("wire {0} is isolated after reduction (no incident resistors)")]
    IsolatedWire(usize),

    #[error("enumeration cap: {n} wires means 2^{n} codes, limit is {cap} wires; use sampled estimation (--samples K --seed S)")]
    EnumerationCap { n: usize, cap: usize },

    #[error("degenerate stream on wire {0}: all bits are equal in the analysis window")]
    DegenerateStream(usize),

    #[error("non-finite voltage on wire {wire} at step {step}")]
    NonFinite { step: usize, wire: usize },

    #[error("singular network: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(matrix: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            matrix: matrix.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
