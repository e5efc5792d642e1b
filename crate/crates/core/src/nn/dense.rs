use rand::Rng;

use super::{kaiming_uniform, Graph, ParamId, ParameterSet, Scalar, Var};
use crate::error::Result;
use ndarray::Array2;

/// Fully connected layer `y = x·Wᵀ + b`, applied row-wise so it doubles as a
/// shared per-point layer.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub n_in: usize,
    pub n_out: usize,
}

impl Dense {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        name: &str,
        n_in: usize,
        n_out: usize,
        rng: &mut R,
    ) -> Self {
        let weight = params.add(
            format!("{name}.weight"),
            kaiming_uniform(n_out, n_in, n_in, rng),
        );
        let bias = params.add(format!("{name}.bias"), Array2::zeros((1, n_out)));
        Self {
            weight,
            bias,
            n_in,
            n_out,
        }
    }

    /// Looks up an existing layer by name.
    pub fn bind<T: Scalar>(params: &ParameterSet<T>, name: &str) -> Option<Self> {
        let weight = params.find(&format!("{name}.weight"))?;
        let bias = params.find(&format!("{name}.bias"))?;
        let (n_out, n_in) = params.value(weight).dim();
        Some(Self {
            weight,
            bias,
            n_in,
            n_out,
        })
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        x: Var,
    ) -> Result<Var> {
        let w = g.param(params, self.weight);
        let b = g.param(params, self.bias);
        let y = g.matmul_t(x, w)?;
        g.add_row(y, b)
    }
}

/// Plain forward evaluation of a dense layer on one input row.
pub fn dense_forward<T: Scalar>(
    params: &ParameterSet<T>,
    layer: &Dense,
    input: &Array2<T>,
) -> Result<Array2<T>> {
    let mut g = Graph::frozen();
    let x = g.constant(input.clone());
    let y = layer.forward(&mut g, params, x)?;
    Ok(g.value(y).clone())
}
