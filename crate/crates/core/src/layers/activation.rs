use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `d_out` where `x > 0`. The subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, d_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != d_out.shape() {
        return Err(Error::shape(format!(
            "relu gradient shape {:?} does not match input {:?}",
            d_out.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(d_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}
