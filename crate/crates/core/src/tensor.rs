//! Dense row-major tensors and the element trait shared by every layer.
//!
//! Image batches are stored NHWC, so the channel index varies fastest. A
//! `[N, 6, 6, 64]` feature map flattens to `[N, 2304]` without moving data.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type. Training runs in `f32`; gradient checks use `f64`.
pub trait Scalar:
    Float + Default + Debug + Display + Sum + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `c = alpha * a * b + beta * c` on strided row/column views.
    ///
    /// # Safety
    /// The pointers and strides must describe valid `m x k`, `k x n` and
    /// `m x n` matrices, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Whether a row-major operand is read as stored or transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    N,
    T,
}

/// `c = a' * b' + beta * c` where `a'` is `m x k`, `b'` is `k x n` and all
/// buffers are dense row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    op_a: Op,
    b: &[T],
    op_b: Op,
    beta: T,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs size");
    assert_eq!(b.len(), k * n, "gemm: rhs size");
    assert_eq!(c.len(), m * n, "gemm: output size");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match op_a {
        Op::N => (k as isize, 1),
        Op::T => (1, m as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (n as isize, 1),
        Op::T => (1, k as isize),
    };
    // SAFETY: sizes were checked above and `c` is a distinct &mut borrow.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape(
            "tensor shape must have at least one dimension",
        ));
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return Err(Error::shape(format!(
            "dimension {pos} of shape {shape:?} is zero"
        )));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape(format!("shape {shape:?} overflows")))
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], fill: T) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, T::zero())
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = checked_len(shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = checked_len(shape)?;
        if len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} ({} elements) into {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Collapse every dimension into one.
    pub fn flatten(mut self) -> Self {
        self.shape = vec![self.data.len()];
        self
    }

    /// Keep the leading batch dimension and collapse the rest: `[N, ...] -> [N, D]`.
    pub fn flatten_batch(mut self) -> Self {
        if self.shape.len() > 1 {
            let n = self.shape[0];
            self.shape = vec![n, self.data.len() / n];
        }
        self
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Copy of rows `rows` along the batch dimension, in the given order.
    pub fn gather_batch(&self, rows: &[usize]) -> Result<Self> {
        let n = self.shape[0];
        let stride = self.data.len() / n;
        let mut data = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            if r >= n {
                return Err(Error::shape(format!(
                    "row {r} out of range for batch of {n}"
                )));
            }
            data.extend_from_slice(&self.data[r * stride..(r + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Tensor::from_vec(&shape, data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_fills_every_element() {
        let t = Tensor::<f32>::new(&[2, 2], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
        let t = Tensor::<f32>::new(&[32, 32, 3], 1.0).unwrap();
        assert_eq!(t.len(), 3072);
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_zero_and_empty_shapes() {
        assert!(Tensor::<f32>::new(&[2, 0], 0.0).is_err());
        assert!(Tensor::<f32>::new(&[], 0.0).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn flatten_shapes() {
        let t = Tensor::<f32>::zeros(&[6, 6, 64]).unwrap();
        assert_eq!(t.flatten().shape(), &[2304]);
        let t = Tensor::<f32>::zeros(&[1, 1, 1]).unwrap();
        assert_eq!(t.flatten().shape(), &[1]);
        let data: Vec<f32> = (0..3 * 2304).map(|i| i as f32).collect();
        let t = Tensor::from_vec(&[3, 6, 6, 64], data.clone()).unwrap();
        let flat = t.flatten_batch();
        assert_eq!(flat.shape(), &[3, 2304]);
        assert_eq!(flat.data(), &data[..]);
        let back = flat.reshape(&[3, 6, 6, 64]).unwrap();
        assert_eq!(back.data(), &data[..]);
    }

    #[test]
    fn gemm_matches_loops() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5).collect(); // 3x4
        let mut c = vec![0.0; 8];
        gemm(2, 3, 4, &a, Op::N, &b, Op::N, 0.0, &mut c);
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum();
                assert_eq!(c[i * 4 + j], want);
            }
        }
        // a^T (3x2) * c (2x4)
        let mut d = vec![0.0; 12];
        gemm(3, 2, 4, &a, Op::T, &c, Op::N, 0.0, &mut d);
        for i in 0..3 {
            for j in 0..4 {
                let want: f64 = (0..2).map(|k| a[k * 3 + i] * c[k * 4 + j]).sum();
                assert!((d[i * 4 + j] - want).abs() < 1e-12);
            }
        }
    }
}
