use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::Float;
use std::fmt::Debug;

/// Floating-point element type usable on the tape.
pub trait Scalar:
    LinalgScalar
    + ScalarOperand
    + Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Debug + Default 
    + Send
    + Sync
    + std::iter::Sum
    + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Tag written into checkpoint headers.
    const DTYPE: &'static str;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    const DTYPE: &'static str = "f32";
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    const DTYPE: &'static str = "f64";
}
