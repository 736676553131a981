use thiserror::Error;

use crate::dynamics::DiagnosticsRecord;

/// Errors raised by the kernel, field, solver and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved relative error {achieved:.3e} (requested {requested:.3e})")]
    Convergence { achieved: f64, requested: f64 },

    #[error("singular kernel evaluation: {0}")]
    Singularity(String),

    #[error("unsupported dimension d = {0} (expected 3..=6)")]
    UnsupportedDimension(u32),

    #[error("operation `{op}` requires d = 3, got d = {d}")]
    RequiresThreeDimensions { op: &'static str, d: u32 },

    #[error("field has no elements")]
    EmptyField,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("negative squared energy {0:.6e} from stream-function double sum")]
    NegativeEnergy(f64),

    #[error("non-finite velocity at t = {t}")]
    NonFinite {
        t: f64,
        last_valid: Option<Box<DiagnosticsRecord>>,
    },

    #[error("linear system is rank deficient: {0}")]
    RankDeficient(String),

    #[error("linear system is inconsistent: {0}")]
    Inconsistent(String),

    #[error("not enough samples: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
