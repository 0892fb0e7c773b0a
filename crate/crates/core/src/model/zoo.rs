//! Built-in architectures.

use crate::error::{Error, Result};
use crate::model::parse::parse_model_spec;
use crate::model::spec::{LayerSpec, ModelSpec};

pub const RCCNET_SPEC: &str = include_str!("../../specs/rccnet.spec");
pub const SOFTMAX_CNN_IN27_SPEC: &str = include_str!("../../specs/in27.spec");
/// Best-effort reconstruction; its count is 64 above the published figure.
pub const SOFTMAX_CNN_SPEC: &str = include_str!("../../specs/softmax_cnn.spec");

/// Placement of batch-norm and dropout after each hidden FC activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FcBlockOrder {
    /// relu -> batchnorm -> dropout
    #[default]
    NormThenDropout,
    /// relu -> dropout -> batchnorm
    DropoutThenNorm,
}

fn conv(filters: usize, kernel: usize, pad: usize) -> [LayerSpec; 3] {
    [
        LayerSpec::Conv {
            filters,
            kernel,
            stride: 1,
            pad,
        },
        LayerSpec::Relu,
        LayerSpec::BatchNorm,
    ]
}

fn hidden_fc(neurons: usize, rate: f64, order: FcBlockOrder) -> [LayerSpec; 4] {
    let fc = LayerSpec::Fc { neurons };
    let dropout = LayerSpec::Dropout { rate };
    match order {
        FcBlockOrder::NormThenDropout => [fc, LayerSpec::Relu, LayerSpec::BatchNorm, dropout],
        FcBlockOrder::DropoutThenNorm => [fc, LayerSpec::Relu, dropout, LayerSpec::BatchNorm],
    }
}

pub fn build_rccnet() -> ModelSpec {
    build_rccnet_with(FcBlockOrder::default())
}

pub fn build_rccnet_with(order: FcBlockOrder) -> ModelSpec {
    let mut layers = Vec::new();
    layers.extend(conv(32, 3, 1));
    layers.extend(conv(32, 3, 0));
    layers.push(LayerSpec::MaxPool);
    layers.extend(conv(64, 3, 1));
    layers.extend(conv(64, 3, 0));
    layers.push(LayerSpec::MaxPool);
    layers.push(LayerSpec::Flatten);
    layers.extend(hidden_fc(512, 0.5, order));
    layers.extend(hidden_fc(512, 0.5, order));
    layers.push(LayerSpec::Fc { neurons: 4 });
    ModelSpec::new("rccnet", [32, 32, 3], layers)
}

pub fn build_softmax_cnn_in27() -> ModelSpec {
    let mut layers = Vec::new();
    layers.extend(conv(36, 4, 0));
    layers.push(LayerSpec::MaxPool);
    layers.extend(conv(48, 3, 0));
    layers.push(LayerSpec::MaxPool);
    layers.push(LayerSpec::Flatten);
    layers.extend(hidden_fc(512, 0.5, FcBlockOrder::default()));
    layers.extend(hidden_fc(512, 0.5, FcBlockOrder::default()));
    layers.push(LayerSpec::Fc { neurons: 4 });
    ModelSpec::new("softmax_cnn_in27", [27, 27, 3], layers)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["rccnet", "softmax_cnn_in27", "softmax_cnn"];

pub fn builtin(name: &str) -> Result<ModelSpec> {
    match name {
        "rccnet" => Ok(build_rccnet()),
        "softmax_cnn_in27" | "in27" => Ok(build_softmax_cnn_in27()),
        "softmax_cnn" => parse_model_spec(SOFTMAX_CNN_SPEC),
        other => Err(Error::invalid(format!(
            "unknown built-in model `{other}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
