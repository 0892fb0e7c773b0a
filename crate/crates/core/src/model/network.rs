//! Running a [`ModelSpec`] over its [`ModelParams`].

use crate::error::{Error, Result};
use crate::layers::{
    dropout_backward, dropout_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, DropoutMask, Mode, PoolIndices,
};
use crate::model::params::{BnConfig, LayerParams, ModelGrads, ModelParams};
use crate::model::spec::{LayerSpec, ModelSpec};
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

/// What a training pass keeps per layer for the backward sweep.
#[derive(Debug, Clone)]
enum Saved<T> {
    Input(Tensor<T>),
    Pool(PoolIndices),
    Dropout(DropoutMask<T>),
    Shape(Vec<usize>),
}

/// Activations recorded by [`Model::forward_train`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    saved: Vec<Saved<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    pub spec: ModelSpec,
    pub params: ModelParams<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(spec: ModelSpec, params: ModelParams<T>) -> Result<Self> {
        params.check_against(&spec)?;
        Ok(Model { spec, params })
    }

    pub fn init(spec: ModelSpec, rng: &mut SeededRng, bn: BnConfig) -> Result<Self> {
        let params = ModelParams::init(&spec, rng, bn)?;
        Ok(Model { spec, params })
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        let [h, w, c] = self.spec.input_shape;
        if s.len() != 4 || s[1..] != [h, w, c] {
            return Err(Error::shape(format!(
                "model `{}` takes [N, {h}, {w}, {c}] input, got {s:?}",
                self.spec.name
            )));
        }
        Ok(())
    }

    /// Class scores for `x` using running batch-norm statistics and no dropout.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (layer, params) in self.spec.layers.iter().zip(&self.params.layers) {
            act = match (layer, params) {
                (LayerSpec::Conv { .. }, LayerParams::Conv(conv)) => conv.forward(&act)?,
                (LayerSpec::Fc { .. }, LayerParams::Fc(fc)) => fc.forward(&act)?,
                (LayerSpec::BatchNorm, LayerParams::BatchNorm(bn)) => bn.forward_eval(&act)?,
                (LayerSpec::MaxPool, _) => maxpool_forward(&act)?.0,
                (LayerSpec::Relu, _) => relu_forward(&act),
                (LayerSpec::Dropout { .. }, _) => act,
                (LayerSpec::Flatten, _) => act.flatten_batch(),
                (l, _) => return Err(Error::shape(format!("no parameters for `{l}`"))),
            };
        }
        Ok(act)
    }

    /// Training pass: batch statistics (updating the running estimates) and
    /// dropout masks drawn from `rng`.
    pub fn forward_train(
        &mut self,
        x: &Tensor<T>,
        rng: &mut SeededRng,
    ) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let mut saved = Vec::with_capacity(self.spec.layers.len());
        let mut act = x.clone();
        for (layer, params) in self.spec.layers.iter().zip(self.params.layers.iter_mut()) {
            let (next, keep) = match (layer, params) {
                (LayerSpec::Conv { .. }, LayerParams::Conv(conv)) => {
                    (conv.forward(&act)?, Saved::Input(act))
                }
                (LayerSpec::Fc { .. }, LayerParams::Fc(fc)) => {
                    (fc.forward(&act)?, Saved::Input(act))
                }
                (LayerSpec::BatchNorm, LayerParams::BatchNorm(bn)) => {
                    (bn.forward_train(&act)?, Saved::Input(act))
                }
                (LayerSpec::Relu, _) => (relu_forward(&act), Saved::Input(act)),
                (LayerSpec::MaxPool, _) => {
                    let (y, idx) = maxpool_forward(&act)?;
                    (y, Saved::Pool(idx))
                }
                (&LayerSpec::Dropout { rate }, _) => {
                    let (y, mask) = dropout_forward(&act, rate, rng, Mode::Train)?;
                    (y, Saved::Dropout(mask))
                }
                (LayerSpec::Flatten, _) => {
                    let shape = act.shape().to_vec();
                    (act.flatten_batch(), Saved::Shape(shape))
                }
                (l, _) => return Err(Error::shape(format!("no parameters for `{l}`"))),
            };
            saved.push(keep);
            act = next;
        }
        Ok((act, ForwardCache { saved }))
    }

    /// Dispatches on `mode`; `rng` is only drawn from in training mode.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut SeededRng) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => Ok(self.forward_train(x, rng)?.0),
            Mode::Eval => self.forward_eval(x),
        }
    }

    /// Reverse sweep from `d_logits = dL/d(scores)` to every learnable array.
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &Tensor<T>) -> Result<ModelGrads<T>> {
        if cache.saved.len() != self.spec.layers.len() {
            return Err(Error::shape("forward cache does not belong to this model"));
        }
        let mut grads = self.params.zero_grads();
        let mut d = d_logits.clone();
        for i in (0..self.spec.layers.len()).rev() {
            let first = i == 0;
            d = match (&self.params.layers[i], &cache.saved[i]) {
                (LayerParams::Conv(conv), Saved::Input(x)) => {
                    let g = if first {
                        conv.backward_params(x, &d)?
                    } else {
                        conv.backward(x, &d)?
                    };
                    grads.layers[i] = vec![g.d_weight, g.d_bias];
                    g.d_input
                }
                (LayerParams::Fc(fc), Saved::Input(x)) => {
                    let g = fc.backward(x, &d)?;
                    grads.layers[i] = vec![g.d_weight, g.d_bias];
                    g.d_input
                }
                (LayerParams::BatchNorm(bn), Saved::Input(x)) => {
                    let g = bn.backward(x, &d)?;
                    grads.layers[i] = vec![g.d_gamma, g.d_beta];
                    g.d_input
                }
                (LayerParams::Stateless, Saved::Input(x)) => relu_backward(x, &d)?,
                (LayerParams::Stateless, Saved::Pool(idx)) => maxpool_backward(idx, &d)?,
                (LayerParams::Stateless, Saved::Dropout(mask)) => dropout_backward(mask, &d)?,
                (LayerParams::Stateless, Saved::Shape(shape)) => d.reshape(shape)?,
                _ => {
                    return Err(Error::shape(format!(
                        "layer {i}: cache does not match parameters"
                    )))
                }
            };
        }
        Ok(grads)
    }
}
