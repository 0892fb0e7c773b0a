//! A small CPU deep-learning stack for classifying 32x32 RGB nuclei patches
//! into four cell classes.
//!
//! Tensors are NHWC and row-major. Layers implement their own forward and
//! backward passes; [`model::Model`] runs a [`model::ModelSpec`] over its
//! parameters, [`optim::AdamState`] updates them, and [`train::train`] wires
//! the whole loop together with splitting, evaluation and checkpointing.
//!
//! ```
//! use rccnet::model::build_rccnet;
//!
//! let spec = build_rccnet();
//! assert_eq!(spec.count_parameters().unwrap(), 1_512_868);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod train;

pub use data::Dataset;
pub use error::{Error, ErrorKind, Result};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use model::{Checkpoint, Model, ModelSpec};
pub use rng::{SeededRng, Stream};
pub use tensor::{Scalar, Tensor};
pub use train::{evaluate, train, EpochRecord, TrainConfig, TrainOutcome};
