//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] borrows a [`ParamStore`], records every operation of one forward
//! pass and replays the adjoints in reverse. Parameters referenced several times
//! share one node, so their gradient is the sum over every use.

mod checkpoint;
mod gradcheck;
mod ops;
mod optim;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
pub use ops::softmax::PROB_FLOOR;
pub use ops::{BnParams, Mode, BN_EPS, BN_MOMENTUM};
pub use optim::{Adam, AdamConfig};
pub use params::{AdamState, ParamId, ParamKind, ParamStore, Parameter};
pub use scalar::Scalar;
pub(crate) use scalar::{gemm, gemm_new, Mat};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

/// Errors raised by the engine.
#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("trainable parameter `{name}` has no gradient")]
    MissingGradient { name: String },
    #[error("batch norm `{name}` evaluated before any running statistics were accumulated")]
    EvalBeforeStats { name: String },
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("backward called on an inference tape")]
    NotRecorded,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
}
