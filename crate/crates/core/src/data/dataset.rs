use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const PATCH_SIDE: usize = 32;
pub const PATCH_CHANNELS: usize = 3;
/// Bytes per patch: 32 x 32 pixels, RGB interleaved.
pub const PATCH_BYTES: usize = PATCH_SIDE * PATCH_SIDE * PATCH_CHANNELS;

pub const CLASS_NAMES: [&str; 4] = ["Epithelial", "Fibroblast", "Inflammatory", "Miscellaneous"];
pub const NUM_CLASSES: usize = CLASS_NAMES.len();

/// Labelled 32x32 RGB nuclei patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// `len() * PATCH_BYTES` bytes, row-major, RGB interleaved per pixel.
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if pixels.len() != labels.len() * PATCH_BYTES {
            return Err(Error::Data(format!(
                "{} labels need {} pixel bytes, got {}",
                labels.len(),
                labels.len() * PATCH_BYTES,
                pixels.len()
            )));
        }
        if let Some((i, &l)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(Error::Data(format!(
                "label {l} of sample {i} is not below {NUM_CLASSES}"
            )));
        }
        Ok(Dataset { pixels, labels })
    }

    pub fn empty() -> Self {
        Dataset {
            pixels: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn patch(&self, i: usize) -> &[u8] {
        &self.pixels[i * PATCH_BYTES..(i + 1) * PATCH_BYTES]
    }

    pub fn class_names(&self) -> &'static [&'static str] {
        &CLASS_NAMES
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn push(&mut self, patch: &[u8], label: u8) -> Result<()> {
        if patch.len() != PATCH_BYTES {
            return Err(Error::Data(format!(
                "patch must be {PATCH_BYTES} bytes, got {}",
                patch.len()
            )));
        }
        if label as usize >= NUM_CLASSES {
            return Err(Error::Data(format!(
                "label {label} is not below {NUM_CLASSES}"
            )));
        }
        self.pixels.extend_from_slice(patch);
        self.labels.push(label);
        Ok(())
    }

    /// New dataset holding the given samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut out = Dataset::empty();
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!(
                    "sample {i} out of range for {} samples",
                    self.len()
                )));
            }
            out.push(self.patch(i), self.labels[i])?;
        }
        Ok(out)
    }

    /// Normalized `[n, 32, 32, 3]` batch of the given samples and their labels.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::invalid("cannot build an empty batch"));
        }
        let mut data = Vec::with_capacity(indices.len() * PATCH_BYTES);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!(
                    "sample {i} out of range for {} samples",
                    self.len()
                )));
            }
            data.extend(self.patch(i).iter().map(|&b| normalize_pixel::<T>(b)));
            labels.push(self.label(i));
        }
        let tensor = Tensor::from_vec(
            &[indices.len(), PATCH_SIDE, PATCH_SIDE, PATCH_CHANNELS],
            data,
        )?;
        Ok((tensor, labels))
    }
}

/// `raw / 255`.
pub fn normalize_pixel<T: Scalar>(raw: u8) -> T {
    T::from_f64(raw as f64 / 255.0)
}

/// Whole dataset as a `[N, 32, 32, 3]` tensor with values in `[0, 1]`.
pub fn normalize<T: Scalar>(ds: &Dataset) -> Result<Tensor<T>> {
    if ds.is_empty() {
        return Err(Error::Data("cannot normalize an empty dataset".into()));
    }
    let data = ds
        .pixels()
        .iter()
        .map(|&b| normalize_pixel::<T>(b))
        .collect();
    Tensor::from_vec(&[ds.len(), PATCH_SIDE, PATCH_SIDE, PATCH_CHANNELS], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_scaling() {
        assert_eq!(normalize_pixel::<f64>(0), 0.0);
        assert_eq!(normalize_pixel::<f64>(255), 1.0);
        assert!((normalize_pixel::<f64>(51) - 0.2).abs() < 1e-15);
        for raw in 0..=255u8 {
            let v = normalize_pixel::<f32>(raw) as f64;
            let back = (v * 255.0).round();
            assert_eq!(back as u8, raw);
            assert!((v - back / 255.0).abs() <= 1.0 / 510.0);
        }
    }

    #[test]
    fn rejects_bad_labels_and_sizes() {
        assert!(Dataset::new(vec![0; PATCH_BYTES], vec![4]).is_err());
        assert!(Dataset::new(vec![0; 10], vec![0]).is_err());
        let mut ds = Dataset::empty();
        assert!(ds.push(&[0; PATCH_BYTES], 3).is_ok());
        assert!(ds.push(&[0; 5], 1).is_err());
        assert_eq!(ds.class_counts(), [0, 0, 0, 1]);
    }

    #[test]
    fn batch_gathers_in_order() {
        let mut ds = Dataset::empty();
        ds.push(&[0; PATCH_BYTES], 1).unwrap();
        ds.push(&[255; PATCH_BYTES], 2).unwrap();
        let (x, y) = ds.batch::<f32>(&[1, 0]).unwrap();
        assert_eq!(x.shape(), &[2, 32, 32, 3]);
        assert_eq!(x.data()[0], 1.0);
        assert_eq!(x.data()[PATCH_BYTES], 0.0);
        assert_eq!(y, vec![2, 1]);
    }
}
