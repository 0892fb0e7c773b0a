//! Central finite differences for verifying hand-written backward passes.

use crate::tensor::Tensor;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every element `i` of `x`.
///
/// `x` is restored after each probe.
pub fn numeric_gradient(
    x: &mut Tensor<f64>,
    h: f64,
    mut f: impl FnMut(&Tensor<f64>) -> f64,
) -> Tensor<f64> {
    let mut grad = x.zeros_like();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = f(x);
        x.data_mut()[i] = orig - h;
        let minus = f(x);
        x.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Denominator floor for [`relative_error`]. Arrays whose true gradient is
/// zero (a bias feeding batch norm, say) are judged on absolute error.
pub const NORM_FLOOR: f64 = 1e-6;

/// `||a - b|| / max(||a|| + ||b||, NORM_FLOOR)` over whole arrays, so
/// isolated near-zero entries do not dominate.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    diff / scale.max(NORM_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let mut x = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = numeric_gradient(&mut x, 1e-5, |t| t.data().iter().map(|v| v * v).sum());
        assert!(relative_error(g.data(), &[2.0, -4.0, 1.0]) < 1e-9);
        assert_eq!(x.data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn error_scale() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!(relative_error(&[5e-18], &[0.0]) < 1e-10);
        assert!((relative_error(&[1.0], &[3.0]) - 0.5).abs() < 1e-15);
    }
}
