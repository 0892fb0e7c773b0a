//! Architecture descriptions, parameter storage, the runnable network and checkpoints.

mod checkpoint;
mod network;
mod params;
mod parse;
mod spec;
pub mod zoo;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use network::{ForwardCache, Model};
pub use params::{BnConfig, LayerParams, ModelGrads, ModelParams, OUTPUT_INIT_SCALE};
pub use parse::parse_model_spec;
pub use spec::{FeatureShape, LayerInfo, LayerSpec, ModelSpec};
pub use zoo::{build_rccnet, build_rccnet_with, build_softmax_cnn_in27, FcBlockOrder};
