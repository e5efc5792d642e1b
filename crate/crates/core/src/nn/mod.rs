//! Differentiable building blocks: tape autodiff, dense layers, losses, Adam
//! and parameter checkpoints.

mod adam;
pub mod checkpoint;
mod dense;
pub mod gradcheck;
mod graph;
mod loss;
mod params;
mod scalar;

pub use adam::{AdamConfig, AdamState};
pub use dense::{dense_forward, Dense};
pub use graph::{Gradients, Graph, Var};
pub use loss::{clamped_l1, mse};
pub(crate) use loss::clamped_l1_slope;
pub use params::{kaiming_uniform, ParamId, ParameterSet};
pub use scalar::Scalar;

/// Plain (untaped) per-column max over rows.
pub fn maxpool_over_rows<T: Scalar>(a: &ndarray::Array2<T>) -> crate::Result<ndarray::Array2<T>> {
    graph::maxpool_rows(a.view()).map(|(v, _)| v)
}

/// Plain (untaped) per-column mean over rows, independent of row order.
pub fn avgpool_over_rows<T: Scalar>(a: &ndarray::Array2<T>) -> crate::Result<ndarray::Array2<T>> {
    graph::avgpool_rows(a.view())
}
