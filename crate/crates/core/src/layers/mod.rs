//! Forward and backward kernels for every layer type in the model zoo.
//!
//! Backward passes are written by hand; each takes the forward input (and
//! any recorded scratch such as pool winners or dropout masks) and returns
//! exact gradients for a scalar loss.

mod activation;
mod batchnorm;
mod conv;
mod dropout;
mod fc;
mod pool;

pub use activation::{relu_backward, relu_forward};
pub use batchnorm::{BatchNormGrads, BatchNormLayer, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use conv::{conv_out_dim, ConvGrads, ConvLayer};
pub use dropout::{dropout_backward, dropout_forward, DropoutMask};
pub use fc::{FcGrads, FcLayer};
pub use pool::{maxpool_backward, maxpool_forward, PoolIndices};

/// Training uses batch statistics and random dropout masks; evaluation is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
