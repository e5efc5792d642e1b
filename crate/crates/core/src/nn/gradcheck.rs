//! Central finite-difference checks of taped gradients (64-bit only).

use ndarray::Array2;

use super::{Graph, ParameterSet, Var};
use crate::error::Result;

/// Largest relative error found and where.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Denominators are floored here so gradients that are (numerically) zero
/// are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the gradients of the scalar built by `f` with central differences
/// of step `h`, for every element of every parameter in `params` and every
/// input tensor (passed to `f` as graph variables). `f` may rebuild a model
/// from a copy of the parameters; gradients are matched by tensor id.
pub fn check<F>(params: &ParameterSet<f64>, inputs: &[Array2<f64>], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &ParameterSet<f64>, &[Var]) -> Result<Var>,
{
    let eval = |p: &ParameterSet<f64>, xs: &[Array2<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.variable(x.clone())).collect();
        let out = f(&mut g, p, &vars)?;
        Ok(g.scalar(out))
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.variable(x.clone())).collect();
    let out = f(&mut g, params, &vars)?;
    let grads = g.backward(out)?;
    let mut analytic = params.clone();
    analytic.zero_grad();
    grads.accumulate_by_id(&mut analytic)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    let mut record = |a: f64, n: f64, what: String| {
        let e = relative_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = e;
            report.worst = format!("{what}: analytic {a:e}, numeric {n:e}");
        }
    };

    let mut probe = params.clone();
    for id in params.ids() {
        for idx in 0..params.value(id).len() {
            let (r, c) = (idx / params.value(id).ncols(), idx % params.value(id).ncols());
            let base = params.value(id)[[r, c]];
            probe.value_mut(id)[[r, c]] = base + h;
            let up = eval(&probe, inputs)?;
            probe.value_mut(id)[[r, c]] = base - h;
            let down = eval(&probe, inputs)?;
            probe.value_mut(id)[[r, c]] = base;
            record(analytic.grad(id)[[r, c]], (up - down) / (2.0 * h), format!("{}[{r},{c}]", params.name(id)));
        }
    }

    let mut xs = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let ga = grads.get_or_zeros(&g, v);
        for r in 0..xs[k].nrows() {
            for c in 0..xs[k].ncols() {
                let base = xs[k][[r, c]];
                xs[k][[r, c]] = base + h;
                let up = eval(params, &xs)?;
                xs[k][[r, c]] = base - h;
                let down = eval(params, &xs)?;
                xs[k][[r, c]] = base;
                record(ga[[r, c]], (up - down) / (2.0 * h), format!("input{k}[{r},{c}]"));
            }
        }
    }
    Ok(report)
}
