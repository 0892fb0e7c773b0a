//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "RCCK"            magic
//! u32               format version (1)
//! u32 + bytes       model spec in text form (UTF-8)
//! f64, f64          batch-norm momentum, epsilon
//! u32               completed epochs
//! u64               seed
//! arrays            parameter arrays, spec order, running statistics after gamma/beta
//! u8                1 if optimizer state follows, else 0
//!   u64 f64 f64     step counter, current lr, base lr
//!   f64 x4, u8      beta1, beta2, epsilon, decay, decay mode (0 lr, 1 l2)
//!   arrays, arrays  first and second moments
//! u32               CRC-32 of every preceding byte
//! ```
//!
//! `arrays` is a `u32` count followed by, per array, a `u32` rank, `u32`
//! dims and raw `f32` values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::params::{BnConfig, ModelParams};
use crate::model::parse::parse_model_spec;
use crate::model::spec::ModelSpec;
use crate::optim::{AdamConfig, AdamState, DecayMode};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RCCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: ModelParams<f32>,
    pub optimizer: Option<AdamState<f32>>,
    pub epoch: u32,
    pub seed: u64,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len_u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v)
            .map_err(|_| Error::invalid(format!("{v} does not fit the checkpoint format")))?;
        self.u32(v);
        Ok(())
    }
    fn arrays<'a>(&mut self, arrays: impl ExactSizeIterator<Item = &'a Tensor<f32>>) -> Result<()> {
        self.len_u32(arrays.len())?;
        for t in arrays {
            self.len_u32(t.shape().len())?;
            for &d in t.shape() {
                self.len_u32(d)?;
            }
            for v in t.data() {
                self.buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            what: "checkpoint",
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.fail(format!(
                "truncated: {what} needs {n} bytes, {} remain",
                self.bytes.len() - self.pos
            ))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn arrays(&mut self, what: &str) -> Result<Vec<Tensor<f32>>> {
        let count = self.u32(what)? as usize;
        let mut out = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            let rank = self.u32("array rank")? as usize;
            if rank == 0 || rank > 8 {
                return Err(self.fail(format!("{what} {i}: unsupported rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(self.u32("array dimension")? as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&l| l > 0)
                .ok_or_else(|| self.fail(format!("{what} {i}: invalid shape {shape:?}")))?;
            let bytes = self.take(
                len.checked_mul(4)
                    .ok_or_else(|| self.fail("array too large"))?,
                "array data",
            )?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            out.push(Tensor::from_vec(&shape, data).map_err(|e| self.fail(e.to_string()))?);
        }
        Ok(out)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        let text = self.spec.to_string();
        w.len_u32(text.len())?;
        w.buf.extend_from_slice(text.as_bytes());
        let bn = self.params.bn_config();
        w.f64(bn.momentum);
        w.f64(bn.epsilon);
        w.u32(self.epoch);
        w.u64(self.seed);
        w.arrays(self.params.arrays().into_iter())?;
        match &self.optimizer {
            None => w.u8(0),
            Some(adam) => {
                w.u8(1);
                w.u64(adam.t);
                w.f64(adam.lr);
                w.f64(adam.config.lr);
                w.f64(adam.config.beta1);
                w.f64(adam.config.beta2);
                w.f64(adam.config.epsilon);
                w.f64(adam.config.decay);
                w.u8(match adam.config.decay_mode {
                    DecayMode::LearningRate => 0,
                    DecayMode::L2 => 1,
                });
                w.arrays(adam.m.iter())?;
                w.arrays(adam.v.iter())?;
            }
        }
        let crc = crc32fast::hash(&w.buf);
        w.u32(crc);
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Format {
                what: "checkpoint",
                offset: bytes.len(),
                message: format!(
                    "truncated: {} bytes is shorter than any checkpoint",
                    bytes.len()
                ),
            });
        }
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            r.pos = 0;
            return Err(r.fail("bad magic, expected \"RCCK\""));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            r.pos = 4;
            return Err(r.fail(format!(
                "unsupported version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::Format {
                what: "checkpoint",
                offset: body.len(),
                message: format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}"),
            });
        }
        let mut r = Reader {
            bytes: body,
            pos: 8,
        };

        let text_len = r.u32("spec length")? as usize;
        let text_at = r.pos;
        let text =
            std::str::from_utf8(r.take(text_len, "spec text")?).map_err(|_| Error::Format {
                what: "checkpoint",
                offset: text_at,
                message: "spec text is not UTF-8".into(),
            })?;
        let spec = parse_model_spec(text).map_err(|e| Error::Format {
            what: "checkpoint",
            offset: text_at,
            message: format!("embedded spec: {e}"),
        })?;
        let bn = BnConfig {
            momentum: r.f64("batch-norm momentum")?,
            epsilon: r.f64("batch-norm epsilon")?,
        };
        if !(0.0..=1.0).contains(&bn.momentum) || !(bn.epsilon > 0.0) {
            return Err(r.fail(format!("invalid batch-norm settings {bn:?}")));
        }
        let epoch = r.u32("epoch")?;
        let seed = r.u64("seed")?;
        let arrays_at = r.pos;
        let arrays = r.arrays("parameter array")?;
        let params = ModelParams::from_arrays(&spec, bn, arrays).map_err(|e| Error::Format {
            what: "checkpoint",
            offset: arrays_at,
            message: e.to_string(),
        })?;

        let optimizer = match r.u8("optimizer flag")? {
            0 => None,
            1 => {
                let t = r.u64("step counter")?;
                let lr = r.f64("learning rate")?;
                let config = AdamConfig {
                    lr: r.f64("base learning rate")?,
                    beta1: r.f64("beta1")?,
                    beta2: r.f64("beta2")?,
                    epsilon: r.f64("epsilon")?,
                    decay: r.f64("decay")?,
                    decay_mode: match r.u8("decay mode")? {
                        0 => DecayMode::LearningRate,
                        1 => DecayMode::L2,
                        other => return Err(r.fail(format!("unknown decay mode {other}"))),
                    },
                };
                let m = r.arrays("first moment")?;
                let v = r.arrays("second moment")?;
                let learnable = params.learnable();
                let matches = |arrays: &[Tensor<f32>]| {
                    arrays.len() == learnable.len()
                        && arrays
                            .iter()
                            .zip(&learnable)
                            .all(|(a, p)| a.shape() == p.shape())
                };
                if !matches(&m) || !matches(&v) {
                    return Err(r.fail("optimizer moments do not match the parameters"));
                }
                Some(AdamState {
                    config,
                    lr,
                    t,
                    m,
                    v,
                })
            }
            other => return Err(r.fail(format!("invalid optimizer flag {other}"))),
        };
        if r.pos != body.len() {
            return Err(r.fail(format!("{} unexpected trailing bytes", body.len() - r.pos)));
        }
        Ok(Checkpoint {
            spec,
            params,
            optimizer,
            epoch,
            seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes =
            fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    checkpoint.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zoo::build_softmax_cnn_in27;
    use crate::rng::SeededRng;

    fn sample(with_optimizer: bool) -> Checkpoint {
        let spec = build_softmax_cnn_in27();
        let params = ModelParams::init(&spec, &mut SeededRng::new(3), BnConfig::default()).unwrap();
        let optimizer = with_optimizer.then(|| {
            let mut adam = AdamState::new(AdamConfig::default(), params.learnable()).unwrap();
            adam.t = 17;
            adam.lr = 1e-5;
            adam.m[0].data_mut()[0] = 0.25;
            adam
        });
        Checkpoint {
            spec,
            params,
            optimizer,
            epoch: 4,
            seed: 99,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for opt in [false, true] {
            let ck = sample(opt);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn truncated_and_bad_magic() {
        let bytes = sample(false).to_bytes().unwrap();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() / 2]),
            Err(Error::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = Checkpoint::from_bytes(&bad).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.rcck");
        let ck = sample(true);
        save_checkpoint(&path, &ck).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }
}
