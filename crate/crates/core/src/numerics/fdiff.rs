//! Central finite differences — the independent oracle used to certify
//! every analytic gradient in the repository.

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::EbmResult;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Elementwise `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h`.
pub fn finite_diff_grad<T, F>(mut f: F, at: &Tensor<T>, h: T) -> EbmResult<Tensor<T>>
where
    T: Scalar,
    F: FnMut(&Tensor<T>) -> EbmResult<T>,
{
    let two_h = h + h;
    let mut grad = Vec::with_capacity(at.numel());
    let mut probe = at.clone();
    for i in 0..at.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.push((plus - minus) / two_h);
    }
    Tensor::from_vec(at.shape().to_vec(), grad)
}

/// Relative error with the mixed denominator `max(|a|, |b|, floor)`.
pub fn rel_error<T: Scalar>(a: T, b: T, floor: T) -> T {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Maximum elementwise relative error between two same-shaped tensors,
/// with the gradient-check floor 1e-8.
pub fn max_rel_error<T: Scalar>(analytic: &Tensor<T>, numeric: &Tensor<T>) -> T {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shape mismatch");
    let floor = T::from_f64(1e-8);
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &b)| rel_error(a, b, floor))
        .fold(T::zero(), |m, e| m.max(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_x_squared_at_two() {
        let at = Tensor::scalar(2.0_f64);
        let g = finite_diff_grad(|x: &Tensor<f64>| Ok(x.data()[0] * x.data()[0]), &at, 1e-5)
            .unwrap();
        assert!((g.item().unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn propagates_evaluation_failure() {
        let at = Tensor::scalar(0.0_f64);
        let r = finite_diff_grad(
            |_x: &Tensor<f64>| Err(crate::error::EbmError::Empty { what: "probe" }),
            &at,
            1e-5,
        );
        assert!(r.is_err());
    }

    #[test]
    fn rel_error_uses_floor_near_zero() {
        assert!(rel_error(0.0_f64, 1e-12, 1e-8) < 1e-3);
    }
}
