//! Recurrent residual network used as a one-step flow map surrogate.

mod format;
mod network;

pub use format::{read_model, write_model, ModelMeta, MODEL_FORMAT_VERSION};
pub use network::{squared_error, BlockParams, DeepResNet, Gradients, WeightSharing, Workspace};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid network shape: {0}")]
    Shape(String),
    #[error("network output is not finite")]
    NonFinite,
    #[error("empty batch")]
    EmptyBatch,
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model file is truncated: {0}")]
    Truncated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
