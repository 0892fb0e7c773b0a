//! Adam with step-wise learning-rate decay, and a reduce-on-plateau schedule.

mod adam;
mod scheduler;

pub use adam::{
    AdamConfig, AdamState, DecayMode, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_DECAY, DEFAULT_EPSILON,
    DEFAULT_LR,
};
pub use scheduler::{Observation, PlateauScheduler, DEFAULT_MIN_DELTA, DEFAULT_PATIENCE};
