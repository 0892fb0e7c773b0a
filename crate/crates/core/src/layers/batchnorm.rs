use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.01;

/// Batch normalization over the last axis.
///
/// For NHWC feature maps that is per channel (statistics pooled over batch
/// and both spatial axes); for `[N, D]` activations it is per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer<T = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    /// Weight of the current batch in `running <- (1 - m) * running + m * batch`.
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads<T = f32> {
    pub d_input: Tensor<T>,
    pub d_gamma: Tensor<T>,
    pub d_beta: Tensor<T>,
}

struct BatchStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    rows: usize,
}

impl<T: Scalar> BatchNormLayer<T> {
    /// Unit scale, zero shift, running mean 0 and running variance 1.
    pub fn new(channels: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::invalid(format!(
                "batch-norm momentum {momentum} outside [0, 1]"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "batch-norm epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(BatchNormLayer {
            gamma: Tensor::new(&[channels], T::one())?,
            beta: Tensor::zeros(&[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::new(&[channels], T::one())?,
            momentum,
            epsilon,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Learnable count: gamma and beta only.
    pub fn parameter_count(&self) -> usize {
        2 * self.channels()
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize> {
        let c = self.channels();
        let last = *x.shape().last().expect("tensor has at least one dimension");
        if x.shape().len() < 2 || last != c {
            return Err(Error::shape(format!(
                "batch-norm over {c} channels cannot take input {:?}",
                x.shape()
            )));
        }
        Ok(c)
    }

    fn stats(&self, x: &Tensor<T>) -> Result<BatchStats> {
        let c = self.check(x)?;
        if x.batch() < 2 {
            return Err(Error::invalid(format!(
                "batch-norm in training mode needs a batch of at least 2, got {}",
                x.batch()
            )));
        }
        let rows = x.len() / c;
        let mut mean = vec![0.0f64; c];
        for row in x.data().chunks_exact(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0f64; c];
        for row in x.data().chunks_exact(c) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v.as_f64() - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= rows as f64);
        Ok(BatchStats { mean, var, rows })
    }

    fn normalize(&self, x: &Tensor<T>, mean: &[f64], var: &[f64]) -> Result<Tensor<T>> {
        let c = mean.len();
        let scale: Vec<f64> = var
            .iter()
            .zip(self.gamma.data())
            .map(|(&v, &g)| g.as_f64() / (v + self.epsilon).sqrt())
            .collect();
        let mut out = x.zeros_like();
        for (o_row, x_row) in out
            .data_mut()
            .chunks_exact_mut(c)
            .zip(x.data().chunks_exact(c))
        {
            for ch in 0..c {
                let y = (x_row[ch].as_f64() - mean[ch]) * scale[ch] + self.beta.data()[ch].as_f64();
                o_row[ch] = T::from_f64(y);
            }
        }
        Ok(out)
    }

    /// Normalize with batch statistics and fold them into the running estimates.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let stats = self.stats(x)?;
        let out = self.normalize(x, &stats.mean, &stats.var)?;
        let m = self.momentum;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = T::from_f64((1.0 - m) * r.as_f64() + m * b);
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = T::from_f64((1.0 - m) * r.as_f64() + m * b);
        }
        Ok(out)
    }

    /// Normalize with running statistics. Pure.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let mean: Vec<f64> = self
            .running_mean
            .data()
            .iter()
            .map(|v| v.as_f64())
            .collect();
        let var: Vec<f64> = self.running_var.data().iter().map(|v| v.as_f64()).collect();
        self.normalize(x, &mean, &var)
    }

    /// Gradient of the training-mode forward, including the dependence of
    /// the batch mean and variance on every input.
    pub fn backward(&self, x: &Tensor<T>, d_out: &Tensor<T>) -> Result<BatchNormGrads<T>> {
        if x.shape() != d_out.shape() {
            return Err(Error::shape(format!(
                "batch-norm gradient shape {:?} does not match input {:?}",
                d_out.shape(),
                x.shape()
            )));
        }
        let BatchStats { mean, var, rows } = self.stats(x)?;
        let c = mean.len();
        let inv_std: Vec<f64> = var
            .iter()
            .map(|&v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let gamma: Vec<f64> = self.gamma.data().iter().map(|v| v.as_f64()).collect();

        let mut sum_dy = vec![0.0f64; c];
        let mut sum_dy_xhat = vec![0.0f64; c];
        for (x_row, g_row) in x.data().chunks_exact(c).zip(d_out.data().chunks_exact(c)) {
            for ch in 0..c {
                let xhat = (x_row[ch].as_f64() - mean[ch]) * inv_std[ch];
                let g = g_row[ch].as_f64();
                sum_dy[ch] += g;
                sum_dy_xhat[ch] += g * xhat;
            }
        }

        let m = rows as f64;
        let mut d_input = x.zeros_like();
        for ((d_row, x_row), g_row) in d_input
            .data_mut()
            .chunks_exact_mut(c)
            .zip(x.data().chunks_exact(c))
            .zip(d_out.data().chunks_exact(c))
        {
            for ch in 0..c {
                let xhat = (x_row[ch].as_f64() - mean[ch]) * inv_std[ch];
                let g = g_row[ch].as_f64();
                let dx =
                    gamma[ch] * inv_std[ch] / m * (m * g - sum_dy[ch] - xhat * sum_dy_xhat[ch]);
                d_row[ch] = T::from_f64(dx);
            }
        }
        Ok(BatchNormGrads {
            d_input,
            d_gamma: Tensor::from_vec(&[c], sum_dy_xhat.into_iter().map(T::from_f64).collect())?,
            d_beta: Tensor::from_vec(&[c], sum_dy.into_iter().map(T::from_f64).collect())?,
        })
    }
}
