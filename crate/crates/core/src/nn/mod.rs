//! Minimal differentiable-network engine.
//!
//! Four layer kinds (dense, 1-D convolution, batch normalization, pointwise
//! activation), reverse-mode gradients, a bias-corrected Adam optimizer, and
//! per-layer activation-variance recording. Everything is `f64`,
//! single-threaded, and deterministic under a fixed seed; trained networks
//! are immutable and may be shared across threads for inference.

mod adam;
mod layer;
mod network;
mod tensor;
mod variance;

pub use adam::AdamState;
pub use layer::{Activation, BatchNorm, Conv1d, Dense, Layer};
pub use network::{ForwardCache, Gradients, Network};
pub use tensor::Tensor2;
pub use variance::VarianceStore;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("width mismatch at {layer}: expected {expected}, got {got}")]
    WidthMismatch {
        layer: String,
        expected: usize,
        got: usize,
    },
    #[error("width {width} not divisible by {channels} channels at {layer}")]
    ChannelMismatch {
        layer: String,
        width: usize,
        channels: usize,
    },
    #[error("non-finite value at {layer}")]
    NonFinite { layer: String },
    #[error("batch normalization needs a batch of at least 2 in train mode, got {got}")]
    SmallBatch { got: usize },
    #[error("cache/gradient shape mismatch at {layer}")]
    ShapeMismatch { layer: String },
    #[error("variance store has no recorded statistics")]
    EmptyVarianceStore,
    #[error("injection site {site} out of range (1..={max})")]
    BadInjectionSite { site: usize, max: usize },
}
