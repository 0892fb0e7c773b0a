use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

/// Per-element multipliers applied by a training pass: `0` or `1 / (1 - rate)`.
/// `None` means the pass was the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T = f32> {
    scale: Option<Vec<T>>,
}

impl<T: Scalar> DropoutMask<T> {
    pub fn identity() -> Self {
        DropoutMask { scale: None }
    }

    pub fn scales(&self) -> Option<&[T]> {
        self.scale.as_deref()
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Inverted dropout: survivors are scaled at training time so evaluation is the identity.
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut SeededRng,
    mode: Mode,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), DropoutMask::identity()));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let scale: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.next_f64() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let data = x.data().iter().zip(&scale).map(|(&v, &s)| v * s).collect();
    Ok((
        Tensor::from_vec(x.shape(), data)?,
        DropoutMask { scale: Some(scale) },
    ))
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, d_out: &Tensor<T>) -> Result<Tensor<T>> {
    match &mask.scale {
        None => Ok(d_out.clone()),
        Some(scale) => {
            if scale.len() != d_out.len() {
                return Err(Error::shape(format!(
                    "dropout mask covers {} elements, gradient has {}",
                    scale.len(),
                    d_out.len()
                )));
            }
            let data = d_out
                .data()
                .iter()
                .zip(scale)
                .map(|(&g, &s)| g * s)
                .collect();
            Tensor::from_vec(d_out.shape(), data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_zero_and_eval_are_identity() {
        let x = Tensor::<f32>::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut rng = SeededRng::new(1);
        for mode in [Mode::Train, Mode::Eval] {
            let (y, m) = dropout_forward(&x, 0.0, &mut rng, mode).unwrap();
            assert_eq!(y, x);
            assert_eq!(dropout_backward(&m, &x).unwrap(), x);
        }
        let (y, _) = dropout_forward(&x, 0.5, &mut rng, Mode::Eval).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn invalid_rates() {
        let x = Tensor::<f32>::zeros(&[2]).unwrap();
        let mut rng = SeededRng::new(1);
        assert!(dropout_forward(&x, 1.0, &mut rng, Mode::Train).is_err());
        assert!(dropout_forward(&x, -0.1, &mut rng, Mode::Train).is_err());
    }

    #[test]
    fn expectation_is_preserved() {
        let x = Tensor::<f64>::new(&[100_000], 1.0).unwrap();
        let mut rng = SeededRng::new(7);
        let (y, _) = dropout_forward(&x, 0.5, &mut rng, Mode::Train).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn backward_uses_forward_mask() {
        let x = Tensor::<f64>::new(&[64], 2.0).unwrap();
        let mut rng = SeededRng::new(3);
        let (y, mask) = dropout_forward(&x, 0.5, &mut rng, Mode::Train).unwrap();
        let g = dropout_backward(&mask, &Tensor::new(&[64], 1.0).unwrap()).unwrap();
        for (yv, gv) in y.data().iter().zip(g.data()) {
            assert_eq!(*yv, 2.0 * gv);
        }
    }
}
