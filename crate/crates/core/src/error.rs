//! Error taxonomy shared by every subsystem.

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum CodecError {
    /// Malformed or unsupported file contents (wrong magic, encoding, layout).
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Invalid configuration or unusable inputs discovered before any work.
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor/buffer dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A caller broke an API contract (mismatched argument structure).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Data that parsed structurally but is internally inconsistent.
    #[error("corrupt data: {0}")]
    Corruption(String),

    /// Artifacts that cannot be combined (e.g. bitstream vs. model quantizer depth).
    #[error("incompatible artifacts: {0}")]
    Incompatible(String),

    /// Operation not supported by design (e.g. upsampling in the resampler).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A metric has no defined value for the given inputs.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Training produced a non-finite loss; state snapshot path is included.
    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: u64, detail: String },

    /// Checkpoint was written by an unknown or newer format revision.
    #[error("checkpoint version mismatch: found {found}, expected {expected}; migration required")]
    Version { found: u32, expected: u32 },
}

pub type Result<T> = std::result::Result<T, CodecError>;

impl CodecError {
    /// Exit code this error maps to at the CLI boundary.
    ///
    /// 2 = usage/configuration, 3 = data/format, 4 = incompatibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            CodecError::Config(_) | CodecError::Unsupported(_) => 2,
            CodecError::Incompatible(_) | CodecError::Version { .. } => 4,
            _ => 3,
        }
    }
}
