//! Minimal tensor and layer stack with exact reverse-mode gradients.

pub mod layers;
pub mod model;
pub mod tensor;

pub use layers::RunningStats;
pub use model::{EncoderConfig, Gradients, Mode, ModelState, Network, ProjectionConfig};
pub use tensor::Tensor;
