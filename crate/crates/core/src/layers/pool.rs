use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Winning input positions of a 2x2/2 max-pool pass, one per output element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Flat input offsets, in output order.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// 2x2 max pooling with stride 2 and no padding on `[N, H, W, C]`.
///
/// Output is `[N, H/2, W/2, C]` (floor); an odd trailing row or column is
/// never read. Ties go to the first element in row-major window order.
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::shape(format!(
            "max-pool input must be [N, H, W, C], got {s:?}"
        )));
    }
    let (n, h, w, c) = (s[0], s[1], s[2], s[3]);
    if h < 2 || w < 2 {
        return Err(Error::shape(format!(
            "max-pool needs at least 2x2 input, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, oh, ow, c])?;
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    let src = x.data();
    let dst = out.data_mut();
    let mut o = 0;
    for s in 0..n {
        let base = s * h * w * c;
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut best_at = base + ((2 * i) * w + 2 * j) * c + ch;
                    let mut best = src[best_at];
                    for (a, b) in [(0, 1), (1, 0), (1, 1)] {
                        let at = base + ((2 * i + a) * w + 2 * j + b) * c + ch;
                        if src[at] > best {
                            best = src[at];
                            best_at = at;
                        }
                    }
                    dst[o] = best;
                    argmax.push(best_at);
                    o += 1;
                }
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            input_shape: s.to_vec(),
            argmax,
        },
    ))
}

/// Route each output gradient to the input position that won its window.
pub fn maxpool_backward<T: Scalar>(indices: &PoolIndices, d_out: &Tensor<T>) -> Result<Tensor<T>> {
    if d_out.len() != indices.argmax.len() {
        return Err(Error::shape(format!(
            "max-pool gradient has {} elements, forward produced {}",
            d_out.len(),
            indices.argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(&indices.input_shape)?;
    let len = dx.len();
    let dst = dx.data_mut();
    for (&at, &g) in indices.argmax.iter().zip(d_out.data()) {
        if at >= len {
            return Err(Error::shape(format!(
                "pool index {at} outside input of {len}"
            )));
        }
        dst[at] += g;
    }
    Ok(dx)
}
