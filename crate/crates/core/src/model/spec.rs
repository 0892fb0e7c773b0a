use std::fmt;

use crate::error::{Error, Result};
use crate::layers::conv_out_dim;

/// One entry of an architecture description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    MaxPool,
    Fc {
        neurons: usize,
    },
    Relu,
    BatchNorm,
    Dropout {
        rate: f64,
    },
    Flatten,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::MaxPool => "maxpool",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::Relu => "relu",
            LayerSpec::BatchNorm => "batchnorm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Layers whose output shape differs in kind or extent from their input.
    pub fn reshapes(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv { .. } | LayerSpec::MaxPool | LayerSpec::Fc { .. } | LayerSpec::Flatten
        )
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                filters,
                kernel,
                stride,
                pad,
            } => write!(
                f,
                "conv {filters} {kernel}x{kernel} stride={stride} pad={pad}"
            ),
            LayerSpec::Fc { neurons } => write!(f, "fc {neurons}"),
            LayerSpec::Dropout { rate } => write!(f, "dropout {rate}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Shape of one sample's activations (batch dimension excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureShape {
    Map { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl FeatureShape {
    pub fn len(&self) -> usize {
        match *self {
            FeatureShape::Map { h, w, c } => h * w * c,
            FeatureShape::Flat(d) => d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of the axis that batch-norm normalizes over.
    pub fn channels(&self) -> usize {
        match *self {
            FeatureShape::Map { c, .. } => c,
            FeatureShape::Flat(d) => d,
        }
    }

    /// Tensor shape for a batch of `n` samples.
    pub fn batched(&self, n: usize) -> Vec<usize> {
        match *self {
            FeatureShape::Map { h, w, c } => vec![n, h, w, c],
            FeatureShape::Flat(d) => vec![n, d],
        }
    }
}

impl fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureShape::Map { h, w, c } => write!(f, "{h}x{w}x{c}"),
            FeatureShape::Flat(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    /// `[H, W, C]`
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

/// Output shape and learnable parameter count of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerInfo {
    pub index: usize,
    pub layer: LayerSpec,
    pub input: FeatureShape,
    pub output: FeatureShape,
    pub parameters: usize,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, input_shape: [usize; 3], layers: Vec<LayerSpec>) -> Self {
        ModelSpec {
            name: name.into(),
            input_shape,
            layers,
        }
    }

    pub fn input(&self) -> FeatureShape {
        let [h, w, c] = self.input_shape;
        FeatureShape::Map { h, w, c }
    }

    /// Symbolically run every layer, failing on the first infeasible one.
    pub fn layer_infos(&self) -> Result<Vec<LayerInfo>> {
        if self.name.is_empty()
            || self
                .name
                .contains(|ch: char| ch.is_whitespace() || ch == '#')
        {
            return Err(Error::invalid(format!(
                "model name `{}` must be a non-empty word without `#`",
                self.name
            )));
        }
        let [h, w, c] = self.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::shape(format!(
                "input shape {h}x{w}x{c} has a zero dimension"
            )));
        }
        let mut shape = self.input();
        let mut infos = Vec::with_capacity(self.layers.len());
        for (index, layer) in self.layers.iter().enumerate() {
            let fail = |message: String| Error::Layer {
                index,
                layer: layer.to_string(),
                message,
            };
            let (output, parameters) = match (*layer, shape) {
                (
                    LayerSpec::Conv {
                        filters,
                        kernel,
                        stride,
                        pad,
                    },
                    FeatureShape::Map { h, w, c },
                ) => {
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(fail("filters, kernel and stride must be at least 1".into()));
                    }
                    match (conv_out_dim(h, kernel, stride, pad), conv_out_dim(w, kernel, stride, pad)) {
                        (Some(oh), Some(ow)) => (
                            FeatureShape::Map { h: oh, w: ow, c: filters },
                            (kernel * kernel * c + 1) * filters,
                        ),
                        _ => {
                            return Err(fail(format!(
                                "{kernel}x{kernel} kernel with padding {pad} does not fit {h}x{w} input"
                            )))
                        }
                    }
                }
                (LayerSpec::MaxPool, FeatureShape::Map { h, w, c }) => {
                    if h < 2 || w < 2 {
                        return Err(fail(format!(
                            "2x2 pooling needs at least 2x2 input, got {h}x{w}"
                        )));
                    }
                    (
                        FeatureShape::Map {
                            h: h / 2,
                            w: w / 2,
                            c,
                        },
                        0,
                    )
                }
                (LayerSpec::Conv { .. } | LayerSpec::MaxPool, FeatureShape::Flat(_)) => {
                    return Err(fail(
                        "needs a spatial feature map, input is already flat".into(),
                    ))
                }
                (LayerSpec::Fc { neurons }, FeatureShape::Flat(d)) => {
                    if neurons == 0 {
                        return Err(fail("fc needs at least one neuron".into()));
                    }
                    (FeatureShape::Flat(neurons), d * neurons + neurons)
                }
                (LayerSpec::Fc { .. }, FeatureShape::Map { .. }) => {
                    return Err(fail(format!(
                        "fc needs a flat input, got {shape}; add `flatten`"
                    )))
                }
                (LayerSpec::Flatten, s) => (FeatureShape::Flat(s.len()), 0),
                (LayerSpec::Relu, s) => (s, 0),
                (LayerSpec::BatchNorm, s) => (s, 2 * s.channels()),
                (LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(fail(format!("dropout rate must be in [0, 1), got {rate}")));
                    }
                    (s, 0)
                }
            };
            infos.push(LayerInfo {
                index,
                layer: *layer,
                input: shape,
                output,
                parameters,
            });
            shape = output;
        }
        Ok(infos)
    }

    /// Shapes after every layer, preceded by the input shape.
    pub fn shape_trace(&self) -> Result<Vec<FeatureShape>> {
        let infos = self.layer_infos()?;
        Ok(std::iter::once(self.input())
            .chain(infos.into_iter().map(|i| i.output))
            .collect())
    }

    /// Output shapes of the layers that change shape (conv, pool, flatten, fc).
    pub fn feature_map_trace(&self) -> Result<Vec<FeatureShape>> {
        Ok(self
            .layer_infos()?
            .into_iter()
            .filter(|i| i.layer.reshapes())
            .map(|i| i.output)
            .collect())
    }

    pub fn output_shape(&self) -> Result<FeatureShape> {
        Ok(self
            .layer_infos()?
            .last()
            .map(|i| i.output)
            .unwrap_or_else(|| self.input()))
    }

    /// Total learnable parameters, batch-norm scale and shift included.
    pub fn count_parameters(&self) -> Result<usize> {
        Ok(self.layer_infos()?.iter().map(|i| i.parameters).sum())
    }

    /// Checks the spec traces and ends in a flat vector of `classes` scores.
    pub fn validate_classifier(&self, classes: usize) -> Result<()> {
        match self.output_shape()? {
            FeatureShape::Flat(d) if d == classes => Ok(()),
            other => Err(Error::shape(format!(
                "model `{}` produces {other}, expected {classes} class scores",
                self.name
            ))),
        }
    }
}

/// Renders the line-oriented text format accepted by [`parse_model_spec`](super::parse_model_spec).
impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [h, w, c] = self.input_shape;
        writeln!(f, "model {} input {h}x{w}x{c}", self.name)?;
        for layer in &self.layers {
            writeln!(f, "{layer}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fc_counts_weights_and_bias() {
        let spec = ModelSpec::new(
            "tiny",
            [1, 1, 4],
            vec![LayerSpec::Flatten, LayerSpec::Fc { neurons: 4 }],
        );
        assert_eq!(spec.count_parameters().unwrap(), 20);
    }

    #[test]
    fn empty_spec_traces_to_input() {
        let spec = ModelSpec::new("id", [32, 32, 3], vec![]);
        assert_eq!(
            spec.shape_trace().unwrap(),
            vec![FeatureShape::Map { h: 32, w: 32, c: 3 }]
        );
        assert_eq!(spec.count_parameters().unwrap(), 0);
    }

    #[test]
    fn oversized_kernel_names_layer() {
        let spec = ModelSpec::new(
            "bad",
            [3, 3, 1],
            vec![
                LayerSpec::Relu,
                LayerSpec::Conv {
                    filters: 1,
                    kernel: 5,
                    stride: 1,
                    pad: 0,
                },
            ],
        );
        match spec.shape_trace() {
            Err(Error::Layer { index, layer, .. }) => {
                assert_eq!(index, 1);
                assert!(layer.starts_with("conv"));
            }
            other => panic!("expected layer error, got {other:?}"),
        }
    }

    #[test]
    fn fc_on_map_requires_flatten() {
        let spec = ModelSpec::new("bad", [2, 2, 1], vec![LayerSpec::Fc { neurons: 3 }]);
        assert!(spec.count_parameters().is_err());
    }
}
