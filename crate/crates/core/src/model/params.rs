use crate::error::{Error, Result};
use crate::layers::{BatchNormLayer, ConvLayer, FcLayer, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
use crate::model::spec::{FeatureShape, LayerSpec, ModelSpec};
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

/// Batch-norm hyperparameters shared by every batch-norm layer of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnConfig {
    pub momentum: f64,
    pub epsilon: f64,
}

impl Default for BnConfig {
    fn default() -> Self {
        BnConfig {
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T = f32> {
    Conv(ConvLayer<T>),
    Fc(FcLayer<T>),
    BatchNorm(BatchNormLayer<T>),
    Stateless,
}

impl<T: Scalar> LayerParams<T> {
    /// Learnable arrays: weight and bias, or gamma and beta.
    pub fn learnable(&self) -> Vec<&Tensor<T>> {
        match self {
            LayerParams::Conv(l) => vec![&l.weight, &l.bias],
            LayerParams::Fc(l) => vec![&l.weight, &l.bias],
            LayerParams::BatchNorm(l) => vec![&l.gamma, &l.beta],
            LayerParams::Stateless => vec![],
        }
    }

    pub fn learnable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            LayerParams::Conv(l) => vec![&mut l.weight, &mut l.bias],
            LayerParams::Fc(l) => vec![&mut l.weight, &mut l.bias],
            LayerParams::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            LayerParams::Stateless => vec![],
        }
    }

    /// Learnable arrays followed by batch-norm running statistics.
    pub fn arrays(&self) -> Vec<&Tensor<T>> {
        match self {
            LayerParams::BatchNorm(l) => vec![&l.gamma, &l.beta, &l.running_mean, &l.running_var],
            other => other.learnable(),
        }
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            LayerParams::BatchNorm(l) => vec![
                &mut l.gamma,
                &mut l.beta,
                &mut l.running_mean,
                &mut l.running_var,
            ],
            other => other.learnable_mut(),
        }
    }
}

/// Every array a model owns, one entry per spec layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    pub layers: Vec<LayerParams<T>>,
}

/// Gradients laid out like [`ModelParams::learnable`]: per layer, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T = f32> {
    pub layers: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> ModelGrads<T> {
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten()
    }
}

fn he_normal<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut SeededRng) -> Result<Tensor<T>> {
    let std = (2.0 / fan_in as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| T::from_f64(rng.standard_normal() * std))
        .collect();
    Tensor::from_vec(shape, data)
}

/// Shrinks the He-normal draw of the final fc layer so untrained logits stay
/// close to zero and the initial loss sits near `ln(classes)`.
pub const OUTPUT_INIT_SCALE: f64 = 0.1;

impl<T: Scalar> ModelParams<T> {
    /// He fan-in normal weights (the final fc scaled by [`OUTPUT_INIT_SCALE`]),
    /// zero biases, unit/zero batch-norm, unit running variance.
    pub fn init(spec: &ModelSpec, rng: &mut SeededRng, bn: BnConfig) -> Result<Self> {
        let infos = spec.layer_infos()?;
        let output_fc = spec
            .layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Fc { .. }));
        let mut layers = Vec::with_capacity(infos.len());
        for info in infos {
            let p = match (&info.layer, info.input) {
                (
                    &LayerSpec::Conv {
                        filters,
                        kernel,
                        stride,
                        pad,
                    },
                    FeatureShape::Map { c, .. },
                ) => {
                    let fan_in = kernel * kernel * c;
                    LayerParams::Conv(ConvLayer::new(
                        he_normal(&[kernel, kernel, c, filters], fan_in, rng)?,
                        Tensor::zeros(&[filters])?,
                        stride,
                        pad,
                    )?)
                }
                (&LayerSpec::Fc { neurons }, FeatureShape::Flat(d)) => {
                    let mut weight = he_normal(&[d, neurons], d, rng)?;
                    if output_fc == Some(info.index) {
                        weight = weight.map(|w| w * T::from_f64(OUTPUT_INIT_SCALE));
                    }
                    LayerParams::Fc(FcLayer::new(weight, Tensor::zeros(&[neurons])?)?)
                }
                (LayerSpec::BatchNorm, s) => LayerParams::BatchNorm(BatchNormLayer::new(
                    s.channels(),
                    bn.momentum,
                    bn.epsilon,
                )?),
                _ => LayerParams::Stateless,
            };
            layers.push(p);
        }
        Ok(ModelParams { layers })
    }

    pub fn learnable(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.learnable()).collect()
    }

    pub fn learnable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.learnable_mut())
            .collect()
    }

    pub fn arrays(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.arrays()).collect()
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.arrays_mut())
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.learnable().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grads(&self) -> ModelGrads<T> {
        ModelGrads {
            layers: self
                .layers
                .iter()
                .map(|l| l.learnable().into_iter().map(|t| t.zeros_like()).collect())
                .collect(),
        }
    }

    /// Confirms the arrays have the shapes `spec` implies.
    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        let template = ModelParams::<T>::shapes_for(spec)?;
        if template.len() != self.layers.len() {
            return Err(Error::shape(format!(
                "parameters cover {} layers, spec has {}",
                self.layers.len(),
                template.len()
            )));
        }
        for (index, (have, want)) in self.layers.iter().zip(&template).enumerate() {
            let have: Vec<&[usize]> = have.arrays().iter().map(|t| t.shape()).collect();
            let want: Vec<&[usize]> = want.iter().map(|s| s.as_slice()).collect();
            if have != want {
                return Err(Error::shape(format!(
                    "layer {index}: parameter shapes {have:?} do not match spec {want:?}"
                )));
            }
        }
        Ok(())
    }

    /// Array shapes per layer, in [`LayerParams::arrays`] order.
    pub fn shapes_for(spec: &ModelSpec) -> Result<Vec<Vec<Vec<usize>>>> {
        Ok(spec
            .layer_infos()?
            .iter()
            .map(|info| match (&info.layer, info.input) {
                (
                    &LayerSpec::Conv {
                        filters, kernel, ..
                    },
                    FeatureShape::Map { c, .. },
                ) => {
                    vec![vec![kernel, kernel, c, filters], vec![filters]]
                }
                (&LayerSpec::Fc { neurons }, FeatureShape::Flat(d)) => {
                    vec![vec![d, neurons], vec![neurons]]
                }
                (LayerSpec::BatchNorm, s) => vec![vec![s.channels()]; 4],
                _ => vec![],
            })
            .collect())
    }

    /// Rebuild parameters from arrays listed in [`arrays`](Self::arrays) order.
    pub fn from_arrays(spec: &ModelSpec, bn: BnConfig, arrays: Vec<Tensor<T>>) -> Result<Self> {
        let template = Self::shapes_for(spec)?;
        let expected: usize = template.iter().map(|l| l.len()).sum();
        if arrays.len() != expected {
            return Err(Error::shape(format!(
                "spec needs {expected} parameter arrays, got {}",
                arrays.len()
            )));
        }
        let mut it = arrays.into_iter();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (index, (layer, shapes)) in spec.layers.iter().zip(&template).enumerate() {
            let taken: Vec<Tensor<T>> = it.by_ref().take(shapes.len()).collect();
            for (t, s) in taken.iter().zip(shapes) {
                if t.shape() != s.as_slice() {
                    return Err(Error::shape(format!(
                        "layer {index}: array shape {:?} does not match spec {s:?}",
                        t.shape()
                    )));
                }
            }
            let mut taken = taken.into_iter();
            let mut next = || taken.next().expect("count checked against template");
            let p = match layer {
                &LayerSpec::Conv { stride, pad, .. } => {
                    LayerParams::Conv(ConvLayer::new(next(), next(), stride, pad)?)
                }
                LayerSpec::Fc { .. } => LayerParams::Fc(FcLayer::new(next(), next())?),
                LayerSpec::BatchNorm => LayerParams::BatchNorm(BatchNormLayer {
                    gamma: next(),
                    beta: next(),
                    running_mean: next(),
                    running_var: next(),
                    momentum: bn.momentum,
                    epsilon: bn.epsilon,
                }),
                _ => LayerParams::Stateless,
            };
            layers.push(p);
        }
        Ok(ModelParams { layers })
    }

    /// Batch-norm settings of the first batch-norm layer, or the defaults.
    pub fn bn_config(&self) -> BnConfig {
        self.layers
            .iter()
            .find_map(|l| match l {
                LayerParams::BatchNorm(b) => Some(BnConfig {
                    momentum: b.momentum,
                    epsilon: b.epsilon,
                }),
                _ => None,
            })
            .unwrap_or_default()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    LayerParams::Conv(c) => LayerParams::Conv(ConvLayer {
                        weight: c.weight.cast(),
                        bias: c.bias.cast(),
                        stride: c.stride,
                        pad: c.pad,
                    }),
                    LayerParams::Fc(f) => LayerParams::Fc(FcLayer {
                        weight: f.weight.cast(),
                        bias: f.bias.cast(),
                    }),
                    LayerParams::BatchNorm(b) => LayerParams::BatchNorm(BatchNormLayer {
                        gamma: b.gamma.cast(),
                        beta: b.beta.cast(),
                        running_mean: b.running_mean.cast(),
                        running_var: b.running_var.cast(),
                        momentum: b.momentum,
                        epsilon: b.epsilon,
                    }),
                    LayerParams::Stateless => LayerParams::Stateless,
                })
                .collect(),
        }
    }
}
