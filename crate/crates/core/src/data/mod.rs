//! Patch datasets: in-memory storage, file formats, splitting, batching and synthetic data.

mod binary;
mod dataset;
mod image_dir;
mod split;
mod synthetic;

pub use binary::{
    decode_binary, encode_binary, load_binary, write_binary, DATASET_MAGIC, DATASET_VERSION,
    HEADER_BYTES, RECORD_BYTES,
};
pub use dataset::{
    normalize, normalize_pixel, Dataset, CLASS_NAMES, NUM_CLASSES, PATCH_BYTES, PATCH_CHANNELS,
    PATCH_SIDE,
};
pub use image_dir::{load_image_dir, read_png_patch, read_png_rgb, write_image_dir, write_png_rgb};
pub use split::{make_batches, split_sizes, split_train_test, stratified_split, SplitResult};
pub use synthetic::synthetic_dataset;

use std::path::Path;

use crate::error::Result;

/// Loads a `.rccd` file, or a class-folder tree if `path` is a directory.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if path.is_dir() {
        load_image_dir(path)
    } else {
        load_binary(path)
    }
}
