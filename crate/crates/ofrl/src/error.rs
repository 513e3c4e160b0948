use thiserror::Error;

/// Errors surfaced by the training stack.
#[derive(Error, Debug)]
pub enum OfrlError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value produced by {op_kind} (node {node})")]
    NonFinite { op_kind: &'static str, node: usize },

    #[error("gradient root must be scalar, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },

    #[error("training diverged at step {step}: {what}")]
    Diverged { step: u64, what: String },

    #[error("expert pretraining failed: best return {best:.3} below threshold {threshold:.3}")]
    ExpertBelowThreshold { best: f64, threshold: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("zero proposal density at sampled action")]
    ZeroProposalDensity,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OfrlError>;
