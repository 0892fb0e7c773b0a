//! Seeded, platform-independent randomness.
//!
//! Every generator is ChaCha8 keyed by a 64-bit seed. Consumers draw from
//! their own stream (ChaCha's 64-bit stream id), so adding draws in one
//! consumer never shifts the sequence seen by another.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Independent consumers of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Dropout = 3,
    Split = 4,
    Synthetic = 5,
    Validation = 6,
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Fresh generator for `stream`, derived from the seed only.
    pub fn stream(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream as u64);
        SeededRng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `n` draws from `[lo, hi)`.
    pub fn uniform(&mut self, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!(
                "uniform range requires finite lo < hi, got [{lo}, {hi})"
            )));
        }
        let dist = Uniform::new(lo, hi);
        Ok((0..n).map(|_| dist.sample(&mut self.inner)).collect())
    }

    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let a = SeededRng::new(0).uniform(5, 0.0, 1.0).unwrap();
        let b = SeededRng::new(0).uniform(5, 0.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn values_stay_in_range() {
        let v = SeededRng::new(3).uniform(10_000, 0.0, 1.0).unwrap();
        assert!(v.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn different_seeds_differ() {
        let a = SeededRng::new(0).uniform(5, 0.0, 1.0).unwrap();
        let b = SeededRng::new(1).uniform(5, 0.0, 1.0).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| x != y));
    }

    #[test]
    fn rejects_empty_range() {
        assert!(SeededRng::new(0).uniform(3, 1.0, 1.0).is_err());
        assert!(SeededRng::new(0).uniform(3, 2.0, 1.0).is_err());
    }

    #[test]
    fn streams_are_independent() {
        let mut init = SeededRng::stream(9, Stream::Init);
        let mut shuffle = SeededRng::stream(9, Stream::Shuffle);
        let a = init.uniform(8, 0.0, 1.0).unwrap();
        let b = shuffle.uniform(8, 0.0, 1.0).unwrap();
        assert_ne!(a, b);
        // Drawing from one stream leaves a fresh copy of the other unchanged.
        let again = SeededRng::stream(9, Stream::Shuffle)
            .uniform(8, 0.0, 1.0)
            .unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn known_first_draws_are_pinned() {
        // Guards against silent changes in the generator or its seeding.
        let mut rng = SeededRng::new(42);
        assert_eq!(rng.next_f64().to_bits(), 0x3fe5_d217_f6a7_2bab);
        assert_eq!(rng.next_f64().to_bits(), 0x3fee_68a7_f8c4_af32);
        let mut init = SeededRng::stream(42, Stream::Init);
        assert_eq!(init.next_f64().to_bits(), 0x3fe6_eff5_0c31_b93d);
    }
}
