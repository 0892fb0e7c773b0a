//! `.rccd` patch files, little-endian:
//!
//! ```text
//! "RCCD"  u32 version = 1  u32 count  u32 class_count = 4
//! count x ( u8 label, 3072 bytes RGB row-major )
//! ```

use std::fs;
use std::path::Path;

use crate::data::dataset::{Dataset, NUM_CLASSES, PATCH_BYTES};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"RCCD";
pub const DATASET_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16;
pub const RECORD_BYTES: usize = 1 + PATCH_BYTES;

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        what: "dataset",
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn encode_binary(ds: &Dataset) -> Result<Vec<u8>> {
    let count = u32::try_from(ds.len())
        .map_err(|_| Error::Data("too many samples for the format".into()))?;
    let mut out = Vec::with_capacity(HEADER_BYTES + ds.len() * RECORD_BYTES);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(NUM_CLASSES as u32).to_le_bytes());
    for i in 0..ds.len() {
        out.push(ds.labels()[i]);
        out.extend_from_slice(ds.patch(i));
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER_BYTES {
        return Err(format_err(
            bytes.len(),
            format!(
                "truncated header: expected {HEADER_BYTES} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != DATASET_MAGIC {
        return Err(format_err(
            0,
            format!("bad magic {:?}, expected \"RCCD\"", &bytes[0..4]),
        ));
    }
    let version = read_u32(bytes, 4);
    if version != DATASET_VERSION {
        return Err(format_err(
            4,
            format!("unsupported version {version}, expected {DATASET_VERSION}"),
        ));
    }
    let count = read_u32(bytes, 8) as usize;
    let class_count = read_u32(bytes, 12) as usize;
    if class_count != NUM_CLASSES {
        return Err(format_err(
            12,
            format!("class count {class_count}, expected {NUM_CLASSES}"),
        ));
    }
    let expected = count
        .checked_mul(RECORD_BYTES)
        .and_then(|b| b.checked_add(HEADER_BYTES))
        .ok_or_else(|| format_err(8, format!("record count {count} is implausibly large")))?;
    if bytes.len() != expected {
        let (offset, what) = if bytes.len() < expected {
            let at = HEADER_BYTES + (bytes.len() - HEADER_BYTES) / RECORD_BYTES * RECORD_BYTES;
            (at, "truncated")
        } else {
            (expected, "trailing data")
        };
        return Err(format_err(
            offset,
            format!(
                "{what}: header declares {count} records ({expected} bytes), file has {} bytes",
                bytes.len()
            ),
        ));
    }
    let mut pixels = Vec::with_capacity(count * PATCH_BYTES);
    let mut labels = Vec::with_capacity(count);
    for (i, record) in bytes[HEADER_BYTES..].chunks_exact(RECORD_BYTES).enumerate() {
        let label = record[0];
        if label as usize >= NUM_CLASSES {
            return Err(format_err(
                HEADER_BYTES + i * RECORD_BYTES,
                format!("record {i} has label {label}, expected below {NUM_CLASSES}"),
            ));
        }
        labels.push(label);
        pixels.extend_from_slice(&record[1..]);
    }
    Dataset::new(pixels, labels)
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_binary(&bytes)
}

pub fn write_binary(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_binary(ds)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
