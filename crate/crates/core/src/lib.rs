pub mod boost;
pub mod data;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod similarity;
pub mod spatial;
pub mod temporal;
pub mod tensor;
pub mod typing;

pub use error::{Error, Result};
pub use tensor::Tensor;
