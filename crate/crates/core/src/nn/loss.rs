use ndarray::Array2;

use super::Scalar;
use crate::error::{Error, Result};

/// `|clamp(pred, -δ, δ) - clamp(target, -δ, δ)|`
pub fn clamped_l1<T: Scalar>(pred: T, target: T, delta: T) -> T {
    let p = pred.max(-delta).min(delta);
    let t = target.max(-delta).min(delta);
    (p - t).abs()
}

/// Derivative of [`clamped_l1`] with respect to `pred`.
pub(crate) fn clamped_l1_slope<T: Scalar>(pred: T, target: T, delta: T) -> T {
    if pred.abs() >= delta {
        return T::zero();
    }
    let t = target.max(-delta).min(delta);
    let d = pred - t;
    if d > T::zero() {
        T::one()
    } else if d < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Mean of squared element differences.
pub fn mse<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("mse: {:?} vs {:?}", a.dim(), b.dim())));
    }
    let n = a.len();
    if n == 0 {
        return Ok(T::zero());
    }
    let total: T = a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(total / T::of(n as f64))
}
