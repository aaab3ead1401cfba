//! Minimal dense networks with hand-written backpropagation.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod qnet;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use gradcheck::max_gradient_error;
pub use layer::{Dense, Mlp, MlpCache};
pub use qnet::{QForward, QNet, QNetSpec};
pub use tensor::Tensor;
