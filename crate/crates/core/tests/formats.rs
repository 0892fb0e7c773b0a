//! Dataset and checkpoint encodings: exact round trips and corruption handling.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rccnet::data::{decode_binary, encode_binary, synthetic_dataset, HEADER_BYTES, RECORD_BYTES};
use rccnet::model::{build_rccnet, BnConfig, Checkpoint, LayerSpec, Model, ModelSpec};
use rccnet::optim::{AdamConfig, AdamState};
use rccnet::{Error, SeededRng};

fn small_checkpoint(spec: ModelSpec, seed: u64) -> Checkpoint {
    let model =
        Model::<f32>::init(spec.clone(), &mut SeededRng::new(seed), BnConfig::default()).unwrap();
    let mut adam = AdamState::new(AdamConfig::default(), model.params.learnable()).unwrap();
    adam.t = 17;
    adam.lr = 1.5e-5;
    for m in adam.m.iter_mut().chain(adam.v.iter_mut()) {
        for (i, v) in m.data_mut().iter_mut().enumerate() {
            *v = (i as f32 * 0.37).sin();
        }
    }
    Checkpoint {
        spec,
        params: model.params,
        optimizer: Some(adam),
        epoch: 3,
        seed,
    }
}

fn tiny() -> ModelSpec {
    ModelSpec::new(
        "tiny",
        [4, 4, 3],
        vec![
            LayerSpec::Conv {
                filters: 2,
                kernel: 3,
                stride: 1,
                pad: 1,
            },
            LayerSpec::BatchNorm,
            LayerSpec::MaxPool,
            LayerSpec::Flatten,
            LayerSpec::Fc { neurons: 4 },
        ],
    )
}

#[test]
fn dataset_round_trip_is_byte_exact() {
    let ds = synthetic_dataset(1, 3);
    let bytes = encode_binary(&ds).unwrap();
    let back = decode_binary(&bytes).unwrap();
    assert_eq!(back, ds);
    assert_eq!(encode_binary(&back).unwrap(), bytes);
}

#[test]
fn rccnet_checkpoint_round_trip_is_byte_exact() {
    let ck = small_checkpoint(build_rccnet(), 9);
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes().unwrap(), bytes);
}

fn expect_error<T>(what: &str, case: usize, f: impl FnOnce() -> rccnet::Result<T>) -> Error {
    match catch_unwind(AssertUnwindSafe(f)) {
        Err(_) => panic!("{what} case {case}: decoder panicked"),
        Ok(Ok(_)) => panic!("{what} case {case}: corruption was accepted"),
        Ok(Err(e)) => {
            assert!(
                e.to_string().len() > 10,
                "{what} case {case}: terse error `{e}`"
            );
            e
        }
    }
}

#[test]
fn dataset_corruption_fuzz() {
    let good = encode_binary(&synthetic_dataset(2, 2)).unwrap();
    let records = (good.len() - HEADER_BYTES) / RECORD_BYTES;
    let mut rng = SeededRng::new(77);
    for case in 0..1000 {
        let mut bad = good.clone();
        match case % 4 {
            0 => {
                let at = rng.below(HEADER_BYTES);
                bad[at] ^= 1 + rng.below(255) as u8;
            }
            1 => {
                let r = rng.below(records);
                bad[HEADER_BYTES + r * RECORD_BYTES] = 4 + rng.below(252) as u8;
            }
            2 => bad.truncate(rng.below(good.len())),
            _ => bad.extend((0..1 + rng.below(5000)).map(|i| i as u8)),
        }
        let e = expect_error("dataset", case, || decode_binary(&bad));
        assert!(
            matches!(
                e,
                Error::Format {
                    what: "dataset",
                    ..
                }
            ),
            "case {case}: {e}"
        );
    }
}

#[test]
fn checkpoint_corruption_fuzz() {
    let good = small_checkpoint(tiny(), 4).to_bytes().unwrap();
    let mut rng = SeededRng::new(78);
    for case in 0..1000 {
        let mut bad = good.clone();
        match case % 3 {
            0 => {
                let at = rng.below(good.len());
                bad[at] ^= 1 + rng.below(255) as u8;
            }
            1 => bad.truncate(rng.below(good.len())),
            _ => bad.extend((0..1 + rng.below(64)).map(|_| rng.below(256) as u8)),
        }
        let e = expect_error("checkpoint", case, || Checkpoint::from_bytes(&bad));
        assert!(
            matches!(
                e,
                Error::Format {
                    what: "checkpoint",
                    ..
                }
            ),
            "case {case}: {e}"
        );
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rcck");
    let ck = small_checkpoint(tiny(), 5);
    rccnet::model::save_checkpoint(&path, &ck).unwrap();
    assert_eq!(rccnet::model::load_checkpoint(&path).unwrap(), ck);
    assert!(rccnet::model::load_checkpoint(dir.path().join("missing.rcck")).is_err());
}
