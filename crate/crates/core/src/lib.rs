pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod nn;
pub mod report;
pub mod scalar;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type MtlModel32 = model::MtlModel<f32>;
pub type MtlModel64 = model::MtlModel<f64>;
