use crate::error::{Error, Result};

/// Multiplies the learning rate by `factor` once the monitored loss has
/// failed to improve by `min_delta` for more than `patience` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub min_lr: f64,
    best: f64,
    wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub lr: f64,
    pub reduced: bool,
}

pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_MIN_DELTA: f64 = 1e-4;

impl PlateauScheduler {
    /// Factor `sqrt(0.1)`, i.e. one decade every two reductions.
    pub fn new(lr: f64, patience: usize, min_delta: f64, min_lr: f64) -> Result<Self> {
        if !(lr > 0.0) || !(min_lr >= 0.0) || min_lr > lr {
            return Err(Error::invalid(format!(
                "scheduler needs 0 <= min_lr <= lr and lr > 0, got lr={lr} min_lr={min_lr}"
            )));
        }
        if !(min_delta >= 0.0) {
            return Err(Error::invalid(format!(
                "min_delta must be non-negative, got {min_delta}"
            )));
        }
        Ok(PlateauScheduler {
            lr,
            factor: 0.1f64.sqrt(),
            patience,
            min_delta,
            min_lr,
            best: f64::INFINITY,
            wait: 0,
        })
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, loss: f64) -> Result<Observation> {
        if loss.is_nan() {
            return Err(Error::Numerical("validation loss is NaN".into()));
        }
        let mut reduced = false;
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait > self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.wait = 0;
                reduced = true;
            }
        }
        Ok(Observation {
            lr: self.lr,
            reduced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improving_losses_never_reduce() {
        let mut s = PlateauScheduler::new(6e-5, 2, 1e-4, 0.0).unwrap();
        for i in 0..50 {
            let obs = s.observe(10.0 - i as f64 * 0.1).unwrap();
            assert!(!obs.reduced);
            assert_eq!(obs.lr, 6e-5);
        }
    }

    #[test]
    fn one_reduction_applies_sqrt_tenth() {
        let mut s = PlateauScheduler::new(6e-5, 0, 1e-4, 0.0).unwrap();
        s.observe(1.0).unwrap();
        let obs = s.observe(1.0).unwrap();
        assert!(obs.reduced);
        assert!((obs.lr - 1.8974e-5).abs() < 1e-9, "{}", obs.lr);
    }

    #[test]
    fn constant_stream_reduces_after_patience_plus_one_waits() {
        let mut s = PlateauScheduler::new(1.0, 3, 1e-4, 0.0).unwrap();
        let reduced: Vec<bool> = (0..10).map(|_| s.observe(0.5).unwrap().reduced).collect();
        // 1 best-setting observation, then waits 1..4; the 4th wait (> patience 3) reduces.
        assert_eq!(
            reduced,
            [false, false, false, false, true, false, false, false, true, false]
        );
    }

    #[test]
    fn floor_and_nan() {
        let mut s = PlateauScheduler::new(1.0, 0, 0.0, 0.5).unwrap();
        s.observe(1.0).unwrap();
        for _ in 0..5 {
            s.observe(1.0).unwrap();
        }
        assert_eq!(s.lr, 0.5);
        assert!(s.observe(f64::NAN).is_err());
    }
}
