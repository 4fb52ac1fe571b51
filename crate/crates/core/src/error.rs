use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} is out of range for {n} modes")]
    ModeOutOfRange { mode: u32, n: u32 },

    #[error("{n} modes exceeds the cap of {cap} (set FERMI_MAX_MODES to raise it)")]
    ModeCapExceeded { n: u32, cap: u32 },

    #[error("mode sets are incompatible: {0}")]
    ModeMismatch(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("eigenvalue {value:.3e} is negative beyond tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error(
        "marginal spectra disagree (mismatch {mismatch:.3e}); entanglement entropy is \
         cut-side dependent (A: {entropy_a:.12e}, B: {entropy_b:.12e})"
    )]
    AmbiguousEntanglement {
        mismatch: f64,
        entropy_a: f64,
        entropy_b: f64,
    },

    #[error("no phase assigned to occupation pattern {pattern}")]
    MissingPhase { pattern: String },

    #[error("linear system solve failed (residual {residual:.3e})")]
    SingularSystem { residual: f64 },

    #[error(
        "marginal spectra differ at trial {trial}, cut {cut}: mismatch {mismatch:.6e} \
         (confirmed by the oracle route; this is a bug, not physics) state: {state}"
    )]
    SpectrumViolation {
        trial: u64,
        cut: String,
        mismatch: f64,
        state: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
