//! Minimal convolutional network engine with hand-written reverse passes.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod network;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use layers::{
    conv2d_forward, dense_forward, maxpool2x2, relu, softmax, softmax_backward, softmax_rows, BatchNorm, Conv2d, Dense,
    Dropout, Flatten, LayerSpec, MaxPool2x2, Mode, Param, Relu,
};
pub use loss::{cross_entropy, softmax_cross_entropy_grad};
pub use network::{FeatureShape, Layer, Sequential};
pub use tensor::Tensor;
