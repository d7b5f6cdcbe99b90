use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the signal, pursuit, synthesis and learning routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },

    #[error("insufficient padding: delay of {delay_samples} samples on {source_len} samples does not fit in {pad_len}")]
    InsufficientPadding {
        delay_samples: f64,
        source_len: usize,
        pad_len: usize,
    },

    #[error("atom has zero energy")]
    ZeroEnergyAtom,

    #[error("signal has zero energy, relative error is undefined")]
    ZeroEnergySignal,

    #[error("Nyquist violation: sample rate {sample_rate_hz} Hz must exceed twice {f0_hz} Hz")]
    Nyquist { f0_hz: f64, sample_rate_hz: f64 },

    #[error("singular Galerkin system at ridge 0, use a positive ridge lambda")]
    SingularSystem,

    #[error("delay {tau_s} s places the atom outside the {window_s} s window")]
    DelayOutOfWindow { tau_s: f64, window_s: f64 },

    #[error("dispersion relation has no real solution at f = {f_hz} Hz")]
    Domain { f_hz: f64 },

    #[error("window of {len} samples too short, {required_len} samples needed")]
    WindowTooShort { len: usize, required_len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("decomposition has {available} terms, {requested} requested (re-run the pursuit with tol 0 and max_terms >= {requested})")]
    NotEnoughTerms { available: usize, requested: usize },

    #[error("training diverged (loss is not finite), try a smaller learning rate")]
    Diverged,

    #[error("csv format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("non-uniform sample spacing in {path} at row {row}")]
    NonUniformSpacing { path: PathBuf, row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
