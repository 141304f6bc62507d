//! Minimal feed-forward network engine.
//!
//! Supports exactly what the RUL regressor needs: 1D convolutions with zero
//! same-padding and stride 1, dense layers, ReLU, inverted dropout, Adam,
//! and RMSE/SSE losses, with analytic gradients for all of it. Parameters
//! and activations are `f32`; loss and gradient accumulation run in `f64`.
//!
//! Every operation is a pure function of its inputs and an explicit seed,
//! so repeated invocation is bit-identical and values are safe to move
//! between threads.

mod adam;
mod batch;
mod engine;
mod loss;
mod params;
mod spec;

pub use adam::{adam_step, AdamState};
pub use batch::Batch;
pub use engine::{backward, forward};
pub use loss::{rmse, sse_loss};
pub use params::{init_parameters, ParameterVector};
pub use spec::{
    Activation, LayerDims, LayerSpec, NetworkSpec, ParameterLayout, TensorRole, TensorSlot,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty input where at least one element is required")]
    EmptyInput,
}
