use crate::error::{Error, Result};
use crate::tensor::{gemm, Op, Scalar, Tensor};

/// Samples lowered per im2col buffer. Bounds scratch memory; the result does
/// not depend on it except through gemm blocking of the weight gradient.
const CHUNK: usize = 16;

/// 2-D convolution over NHWC input with square kernels and symmetric zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    /// `[K, K, C_in, C_out]`
    pub weight: Tensor<T>,
    /// `[C_out]`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub d_input: Tensor<T>,
    pub d_weight: Tensor<T>,
    pub d_bias: Tensor<T>,
}

/// Output extent of a strided window over a padded axis, if any window fits.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    c_in: usize,
    k: usize,
    c_out: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn patch_len(&self) -> usize {
        self.k * self.k * self.c_in
    }

    fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>, stride: usize, pad: usize) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 4 || ws[0] != ws[1] {
            return Err(Error::shape(format!(
                "conv weight must be [K, K, C_in, C_out], got {ws:?}"
            )));
        }
        if bias.shape() != [ws[3]] {
            return Err(Error::shape(format!(
                "conv bias must be [{}], got {:?}",
                ws[3],
                bias.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::invalid("conv stride must be at least 1"));
        }
        Ok(ConvLayer {
            weight,
            bias,
            stride,
            pad,
        })
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[3]
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn geometry(&self, x: &Tensor<T>) -> Result<Geometry> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::shape(format!(
                "conv input must be [N, H, W, C], got {s:?}"
            )));
        }
        let (n, h, w, c_in) = (s[0], s[1], s[2], s[3]);
        if c_in != self.in_channels() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {c_in}",
                self.in_channels()
            )));
        }
        let k = self.kernel();
        let (out_h, out_w) = match (
            conv_out_dim(h, k, self.stride, self.pad),
            conv_out_dim(w, k, self.stride, self.pad),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::shape(format!(
                    "{k}x{k} kernel does not fit {h}x{w} input with padding {}",
                    self.pad
                )))
            }
        };
        Ok(Geometry {
            n,
            h,
            w,
            c_in,
            k,
            c_out: self.out_channels(),
            out_h,
            out_w,
        })
    }

    /// Unroll the windows of samples `first..first + count` into rows of
    /// `cols`, one row per output pixel, columns ordered `(a, b, c)` to
    /// match the weight layout.
    fn im2col(&self, g: &Geometry, x: &[T], first: usize, count: usize, cols: &mut [T]) {
        let patch = g.patch_len();
        let row_stride = g.w * g.c_in;
        let sample_stride = g.h * row_stride;
        let mut row = 0;
        for s in first..first + count {
            let img = &x[s * sample_stride..(s + 1) * sample_stride];
            for oi in 0..g.out_h {
                for oj in 0..g.out_w {
                    let dst = &mut cols[row * patch..(row + 1) * patch];
                    for a in 0..g.k {
                        let seg = &mut dst[a * g.k * g.c_in..(a + 1) * g.k * g.c_in];
                        let i = (oi * self.stride + a) as isize - self.pad as isize;
                        if i < 0 || i as usize >= g.h {
                            seg.fill(T::zero());
                            continue;
                        }
                        let src_row = &img[i as usize * row_stride..(i as usize + 1) * row_stride];
                        for b in 0..g.k {
                            let j = (oj * self.stride + b) as isize - self.pad as isize;
                            let cell = &mut seg[b * g.c_in..(b + 1) * g.c_in];
                            if j < 0 || j as usize >= g.w {
                                cell.fill(T::zero());
                            } else {
                                let j = j as usize;
                                cell.copy_from_slice(&src_row[j * g.c_in..(j + 1) * g.c_in]);
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// Scatter-add column gradients back into the input gradient.
    fn col2im(&self, g: &Geometry, cols: &[T], first: usize, count: usize, dx: &mut [T]) {
        let patch = g.patch_len();
        let row_stride = g.w * g.c_in;
        let sample_stride = g.h * row_stride;
        let mut row = 0;
        for s in first..first + count {
            let img = &mut dx[s * sample_stride..(s + 1) * sample_stride];
            for oi in 0..g.out_h {
                for oj in 0..g.out_w {
                    let src = &cols[row * patch..(row + 1) * patch];
                    for a in 0..g.k {
                        let i = (oi * self.stride + a) as isize - self.pad as isize;
                        if i < 0 || i as usize >= g.h {
                            continue;
                        }
                        for b in 0..g.k {
                            let j = (oj * self.stride + b) as isize - self.pad as isize;
                            if j < 0 || j as usize >= g.w {
                                continue;
                            }
                            let at = i as usize * row_stride + j as usize * g.c_in;
                            let from = (a * g.k + b) * g.c_in;
                            for (d, &v) in img[at..at + g.c_in]
                                .iter_mut()
                                .zip(&src[from..from + g.c_in])
                            {
                                *d += v;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// `out[n,i,j,o] = bias[o] + sum_{a,b,c} x_pad[n, i*s+a, j*s+b, c] * w[a,b,c,o]`
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geometry(x)?;
        let patch = g.patch_len();
        let pixels = g.out_pixels();
        let mut out = Tensor::zeros(&[g.n, g.out_h, g.out_w, g.c_out])?;
        let bias = self.bias.data();
        for row in out.data_mut().chunks_exact_mut(g.c_out) {
            row.copy_from_slice(bias);
        }
        let mut cols = vec![T::zero(); CHUNK.min(g.n) * pixels * patch];
        let mut first = 0;
        while first < g.n {
            let count = CHUNK.min(g.n - first);
            let rows = count * pixels;
            let cols = &mut cols[..rows * patch];
            self.im2col(&g, x.data(), first, count, cols);
            let dst =
                &mut out.data_mut()[first * pixels * g.c_out..(first + count) * pixels * g.c_out];
            gemm(
                rows,
                patch,
                g.c_out,
                cols,
                Op::N,
                self.weight.data(),
                Op::N,
                T::one(),
                dst,
            );
            first += count;
        }
        Ok(out)
    }

    /// Gradients of a scalar loss given `d_out = dL/d(forward(x))`.
    pub fn backward(&self, x: &Tensor<T>, d_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        self.backward_impl(x, d_out, true)
    }

    /// As [`backward`](Self::backward) but skips the input gradient, which
    /// the first layer of a network never needs. `d_input` is left zero.
    pub fn backward_params(&self, x: &Tensor<T>, d_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        self.backward_impl(x, d_out, false)
    }

    fn backward_impl(
        &self,
        x: &Tensor<T>,
        d_out: &Tensor<T>,
        want_input: bool,
    ) -> Result<ConvGrads<T>> {
        let g = self.geometry(x)?;
        let expected = [g.n, g.out_h, g.out_w, g.c_out];
        if d_out.shape() != expected {
            return Err(Error::shape(format!(
                "conv output gradient must be {expected:?}, got {:?}",
                d_out.shape()
            )));
        }
        let patch = g.patch_len();
        let pixels = g.out_pixels();
        let mut d_weight = self.weight.zeros_like();
        let mut d_bias = self.bias.zeros_like();
        let mut d_input = x.zeros_like();

        for row in d_out.data().chunks_exact(g.c_out) {
            for (acc, &v) in d_bias.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }

        let mut cols = vec![T::zero(); CHUNK.min(g.n) * pixels * patch];
        let mut first = 0;
        while first < g.n {
            let count = CHUNK.min(g.n - first);
            let rows = count * pixels;
            let cols = &mut cols[..rows * patch];
            let dy = &d_out.data()[first * pixels * g.c_out..(first + count) * pixels * g.c_out];
            self.im2col(&g, x.data(), first, count, cols);
            // dW += cols^T * dY
            gemm(
                patch,
                rows,
                g.c_out,
                cols,
                Op::T,
                dy,
                Op::N,
                T::one(),
                d_weight.data_mut(),
            );
            if want_input {
                // dCols = dY * W^T
                gemm(
                    rows,
                    g.c_out,
                    patch,
                    dy,
                    Op::N,
                    self.weight.data(),
                    Op::T,
                    T::zero(),
                    cols,
                );
                self.col2im(&g, cols, first, count, d_input.data_mut());
            }
            first += count;
        }
        Ok(ConvGrads {
            d_input,
            d_weight,
            d_bias,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(
        weight: Vec<f64>,
        k: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
        pad: usize,
    ) -> ConvLayer<f64> {
        ConvLayer::new(
            Tensor::from_vec(&[k, k, c_in, c_out], weight).unwrap(),
            Tensor::zeros(&[c_out]).unwrap(),
            stride,
            pad,
        )
        .unwrap()
    }

    #[test]
    fn output_dims() {
        assert_eq!(conv_out_dim(32, 3, 1, 1), Some(32));
        assert_eq!(conv_out_dim(32, 3, 1, 0), Some(30));
        assert_eq!(conv_out_dim(15, 3, 1, 0), Some(13));
        assert_eq!(conv_out_dim(3, 5, 1, 0), None);
        assert_eq!(conv_out_dim(7, 3, 2, 0), Some(3));
    }

    #[test]
    fn first_rccnet_conv_shape() {
        let l = ConvLayer::<f32>::new(
            Tensor::new(&[3, 3, 3, 32], 0.01).unwrap(),
            Tensor::zeros(&[32]).unwrap(),
            1,
            1,
        )
        .unwrap();
        let x = Tensor::new(&[1, 32, 32, 3], 1.0).unwrap();
        assert_eq!(l.forward(&x).unwrap().shape(), &[1, 32, 32, 32]);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let l = layer(w, 3, 1, 1, 1, 1);
        let x = Tensor::from_vec(&[1, 3, 3, 1], (1..=9).map(|v| v as f64).collect()).unwrap();
        assert_eq!(l.forward(&x).unwrap().data(), x.data());
    }

    #[test]
    fn zero_cotangent_gives_zero_grads() {
        let l = layer((0..18).map(|v| v as f64 * 0.1).collect(), 3, 1, 2, 1, 1);
        let x = Tensor::new(&[2, 4, 4, 1], 0.5).unwrap();
        let g = l
            .backward(&x, &Tensor::zeros(&[2, 4, 4, 2]).unwrap())
            .unwrap();
        assert!(g.d_input.data().iter().all(|&v| v == 0.0));
        assert!(g.d_weight.data().iter().all(|&v| v == 0.0));
        assert!(g.d_bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (w, x, gy) = (0.7, -1.3, 2.5);
        let l = layer(vec![w], 1, 1, 1, 1, 0);
        let xt = Tensor::from_vec(&[1, 1, 1, 1], vec![x]).unwrap();
        let g = l
            .backward(&xt, &Tensor::from_vec(&[1, 1, 1, 1], vec![gy]).unwrap())
            .unwrap();
        assert_eq!(g.d_input.data(), &[w * gy]);
        assert_eq!(g.d_weight.data(), &[x * gy]);
        assert_eq!(g.d_bias.data(), &[gy]);
    }

    #[test]
    fn shape_errors() {
        let l = layer(vec![0.0; 25], 5, 1, 1, 1, 0);
        assert!(l.forward(&Tensor::zeros(&[1, 3, 3, 1]).unwrap()).is_err());
        assert!(l.forward(&Tensor::zeros(&[1, 8, 8, 2]).unwrap()).is_err());
        let x = Tensor::zeros(&[1, 6, 6, 1]).unwrap();
        assert!(l
            .backward(&x, &Tensor::zeros(&[1, 3, 3, 1]).unwrap())
            .is_err());
    }

    #[test]
    fn chunking_does_not_change_forward() {
        // 20 samples crosses a chunk boundary; each sample must match its own solo pass.
        let l = layer(
            (0..18).map(|v| (v as f64 - 9.0) * 0.05).collect(),
            3,
            2,
            1,
            1,
            1,
        );
        let data: Vec<f64> = (0..20 * 4 * 4 * 2)
            .map(|v| ((v * 37 % 11) as f64) * 0.1)
            .collect();
        let x = Tensor::from_vec(&[20, 4, 4, 2], data).unwrap();
        let all = l.forward(&x).unwrap();
        for s in 0..20 {
            let one = l.forward(&x.gather_batch(&[s]).unwrap()).unwrap();
            assert_eq!(one.data(), &all.data()[s * 16..(s + 1) * 16]);
        }
    }
}
