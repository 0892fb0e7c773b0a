//! Shared fixtures for the criterion benches.

use rccnet::data::synthetic_dataset;
use rccnet::model::{build_rccnet, BnConfig};
use rccnet::{Model, SeededRng, Stream, Tensor};

/// Uniform `[-1, 1)` tensor.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
    let len = shape.iter().product();
    let data = SeededRng::new(seed).uniform(len, -1.0, 1.0).unwrap();
    Tensor::from_vec(shape, data.into_iter().map(|v| v as f32).collect()).unwrap()
}

pub fn rccnet_model(seed: u64) -> Model<f32> {
    Model::init(
        build_rccnet(),
        &mut SeededRng::stream(seed, Stream::Init),
        BnConfig::default(),
    )
    .unwrap()
}

/// A normalized synthetic batch with its labels.
pub fn synthetic_batch(size: usize) -> (Tensor<f32>, Vec<usize>) {
    let ds = synthetic_dataset(0, size.div_ceil(4));
    let idx: Vec<usize> = (0..size).collect();
    ds.batch(&idx).unwrap()
}
