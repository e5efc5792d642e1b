use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ParameterSet, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every tensor of one parameter set.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterSet<T>, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: params.ids().map(|id| Array2::zeros(params.value(id).raw_dim())).collect(),
            v: params.ids().map(|id| Array2::zeros(params.value(id).raw_dim())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update from the accumulated gradients.
    /// Gradients are left untouched; callers zero them between steps.
    pub fn step(&mut self, params: &mut ParameterSet<T>) {
        self.step += 1;
        let c = self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        let bc1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let lr = T::of(c.lr);
        let eps = T::of(c.eps);
        for id in params.ids().collect::<Vec<_>>() {
            let (value, grad) = params.value_and_grad_mut(id);
            let m = &mut self.m[id.index()];
            let v = &mut self.v[id.index()];
            ndarray::Zip::from(value)
                .and(grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Graph;
    use ndarray::array;

    fn minimize_quadratic() -> ParameterSet<f64> {
        let mut ps = ParameterSet::new();
        let w = ps.add("w", array![[0.0]]);
        let mut adam = AdamState::new(&ps, AdamConfig::with_lr(0.1));
        for _ in 0..500 {
            ps.zero_grad();
            let mut g = Graph::new();
            let vw = g.param(&ps, w);
            let three = g.constant(array![[3.0]]);
            let d = g.sub(vw, three).unwrap();
            let loss = g.squared_norm(d);
            g.backward(loss).unwrap().accumulate(&mut ps);
            adam.step(&mut ps);
        }
        ps
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let ps = minimize_quadratic();
        let w = ps.value(ps.find("w").unwrap())[[0, 0]];
        assert!((w - 3.0).abs() < 1e-2, "w = {w}");
    }

    #[test]
    fn runs_are_bitwise_identical() {
        assert_eq!(minimize_quadratic().checksum(), minimize_quadratic().checksum());
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut ps = ParameterSet::<f64>::new();
        ps.add("w", array![[1.5, -2.0]]);
        let before = ps.checksum();
        let mut adam = AdamState::new(&ps, AdamConfig::default());
        adam.step(&mut ps);
        assert_eq!(ps.checksum(), before);
        assert_eq!(adam.step_count(), 1);
    }
}
