use crate::error::{Error, Result};
use crate::tensor::{gemm, Op, Scalar, Tensor};

/// Fully-connected layer: `out = x * W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer<T = f32> {
    /// `[D_in, D_out]`
    pub weight: Tensor<T>,
    /// `[D_out]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcGrads<T = f32> {
    pub d_input: Tensor<T>,
    pub d_weight: Tensor<T>,
    pub d_bias: Tensor<T>,
}

impl<T: Scalar> FcLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[1]] {
            return Err(Error::shape(format!(
                "fc expects weight [D_in, D_out] and bias [D_out], got {ws:?} and {:?}",
                bias.shape()
            )));
        }
        Ok(FcLayer { weight, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.in_features() {
            return Err(Error::shape(format!(
                "fc expects input [N, {}], got {s:?}",
                self.in_features()
            )));
        }
        Ok(s[0])
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check_input(x)?;
        let (d_in, d_out) = (self.in_features(), self.out_features());
        let mut out = Tensor::zeros(&[n, d_out])?;
        for row in out.data_mut().chunks_exact_mut(d_out) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(
            n,
            d_in,
            d_out,
            x.data(),
            Op::N,
            self.weight.data(),
            Op::N,
            T::one(),
            out.data_mut(),
        );
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor<T>, d_out: &Tensor<T>) -> Result<FcGrads<T>> {
        let n = self.check_input(x)?;
        let (d_in, dout) = (self.in_features(), self.out_features());
        if d_out.shape() != [n, dout] {
            return Err(Error::shape(format!(
                "fc output gradient must be [{n}, {dout}], got {:?}",
                d_out.shape()
            )));
        }
        let mut d_input = x.zeros_like();
        gemm(
            n,
            dout,
            d_in,
            d_out.data(),
            Op::N,
            self.weight.data(),
            Op::T,
            T::zero(),
            d_input.data_mut(),
        );
        let mut d_weight = self.weight.zeros_like();
        gemm(
            d_in,
            n,
            dout,
            x.data(),
            Op::T,
            d_out.data(),
            Op::N,
            T::zero(),
            d_weight.data_mut(),
        );
        let mut d_bias = self.bias.zeros_like();
        for row in d_out.data().chunks_exact(dout) {
            for (acc, &v) in d_bias.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        Ok(FcGrads {
            d_input,
            d_weight,
            d_bias,
        })
    }
}
