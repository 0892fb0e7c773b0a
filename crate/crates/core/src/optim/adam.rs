use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_LR: f64 = 6e-5;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_DECAY: f64 = 1e-6;

/// How the `decay` coefficient is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecayMode {
    /// Step-wise learning-rate decay: `lr_t = lr / (1 + decay * t)`.
    #[default]
    LearningRate,
    /// Coupled L2 penalty: `g <- g + decay * p`, learning rate untouched.
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub decay: f64,
    pub decay_mode: DecayMode,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: DEFAULT_LR,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            decay: DEFAULT_DECAY,
            decay_mode: DecayMode::LearningRate,
        }
    }
}

/// Adam moments and step counter for one set of parameter arrays.
///
/// `lr` is the scheduler-controlled base rate; per-step decay is applied on top.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub lr: f64,
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a, I>(config: AdamConfig, params: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Tensor<T>>,
    {
        if !(config.lr > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                config.lr
            )));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if !(config.decay >= 0.0) {
            return Err(Error::invalid(format!(
                "decay must be non-negative, got {}",
                config.decay
            )));
        }
        let m: Vec<Tensor<T>> = params.into_iter().map(|p| p.zeros_like()).collect();
        let v = m.clone();
        Ok(AdamState {
            lr: config.lr,
            config,
            t: 0,
            m,
            v,
        })
    }

    /// Learning rate applied by the next step.
    pub fn effective_lr(&self, t: u64) -> f64 {
        match self.config.decay_mode {
            DecayMode::LearningRate => self.lr / (1.0 + self.config.decay * t as f64),
            DecayMode::L2 => self.lr,
        }
    }

    /// One update of every array. Nothing is modified if any check fails.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[&Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} arrays, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.m).enumerate() {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::shape(format!(
                    "array {i}: parameter {:?}, gradient {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient in array {i}"
                )));
            }
        }

        self.t += 1;
        let t = self.t;
        let lr_t = self.effective_lr(t);
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            decay,
            decay_mode,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powf(t as f64);
        let bc2 = 1.0 - beta2.powf(t as f64);
        let l2 = if decay_mode == DecayMode::L2 {
            decay
        } else {
            0.0
        };
        let (b1, b2) = (T::from_f64(beta1), T::from_f64(beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - beta1), T::from_f64(1.0 - beta2));

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let p = p.data_mut();
            for (((pv, &gv), mv), vv) in p
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gv = if l2 != 0.0 {
                    gv + T::from_f64(l2) * *pv
                } else {
                    gv
                };
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                let m_hat = mv.as_f64() / bc1;
                let v_hat = vv.as_f64() / bc2;
                *pv -= T::from_f64(lr_t * m_hat / (v_hat.sqrt() + epsilon));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::from_vec(&[1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = Tensor::<f64>::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        let g = p.zeros_like();
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.t, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.0);
        let cfg = AdamConfig {
            lr: 0.001,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(cfg, [&p]).unwrap();
        adam.step(&mut [&mut p], &[&scalar(1.0)]).unwrap();
        assert!((p.data()[0] + 0.001).abs() < 1e-8, "{}", p.data()[0]);
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = scalar(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        assert!(adam.step(&mut [&mut p], &[&scalar(f64::NAN)]).is_err());
        assert!(adam
            .step(&mut [&mut p], &[&Tensor::zeros(&[2]).unwrap()])
            .is_err());
        assert_eq!(adam.t, 0);
    }

    #[test]
    fn l2_mode_keeps_lr_and_pulls_toward_zero() {
        let cfg = AdamConfig {
            lr: 0.01,
            decay: 0.1,
            decay_mode: DecayMode::L2,
            ..AdamConfig::default()
        };
        let mut p = scalar(2.0);
        let mut adam = AdamState::new(cfg, [&p]).unwrap();
        assert_eq!(adam.effective_lr(1000), 0.01);
        adam.step(&mut [&mut p], &[&scalar(0.0)]).unwrap();
        assert!(p.data()[0] < 2.0);
    }
}
