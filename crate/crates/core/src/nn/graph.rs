//! Reverse-mode differentiation over 2-D tensors.
//!
//! Every tensor is a `rows × cols` matrix; vectors are `1 × n`. A [`Graph`]
//! records the forward pass as a flat tape and [`Graph::backward`] walks it in
//! reverse, skipping nodes that do not depend on any trainable input.

use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::{ParamId, ParameterSet, Scalar};
use crate::error::{Error, Result};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Constant,
    Variable,
    Param { set: u64, id: ParamId },
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// `a + row` with `row` broadcast over the rows of `a`.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    TileRows(Var),
    MaxPoolRows(Var, Vec<usize>),
    AvgPoolRows(Var),
    Sum(Var),
    Mean(Var),
    SquaredNorm(Var),
    ClampedL1 { pred: Var, target: Array2<T>, delta: T },
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// A recorded forward computation.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    trainable_params: bool,
    param_cache: HashMap<(u64, usize), Var>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    /// Graph in which parameters receive gradients.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            trainable_params: true,
            param_cache: HashMap::new(),
        }
    }

    /// Graph in which parameters are treated as constants. Explicit
    /// [`Graph::variable`] inputs still receive gradients.
    pub fn frozen() -> Self {
        Self {
            trainable_params: false,
            ..Self::new()
        }
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Input whose gradient is wanted.
    pub fn variable(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Variable, true)
    }

    /// Leaf bound to a parameter. Repeated calls for the same parameter reuse
    /// one node so gradients sum over every use.
    pub fn param(&mut self, params: &ParameterSet<T>, id: ParamId) -> Var {
        let key = (params.uid(), id.index());
        if let Some(&v) = self.param_cache.get(&key) {
            return v;
        }
        let trainable = self.trainable_params;
        let v = self.push(
            params.value(id).clone(),
            Op::Param {
                set: params.uid(),
                id,
            },
            trainable,
        );
        self.param_cache.insert(key, v);
        v
    }

    /// `a · bᵀ` where `a` is `n × k` and `b` is `m × k`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.shape(a);
        let (m, k2) = self.shape(b);
        if k != k2 {
            return Err(Error::shape(format!("matmul_t: {n}x{k} by ({m}x{k2})ᵀ")));
        }
        let value = self.value(a).dot(&self.value(b).t());
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMulT(a, b), ng))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a) - self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a) * self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, m) = self.shape(a);
        if self.shape(row) != (1, m) {
            return Err(Error::shape(format!(
                "add_row: row {:?} for {m} columns",
                self.shape(row)
            )));
        }
        let value = self.value(a) + self.value(row);
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let value = self.value(a) * factor;
        let ng = self.needs(a);
        self.push(value, Op::Scale(a, factor), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| if x > T::zero() { x } else { T::zero() });
        let ng = self.needs(a);
        self.push(value, Op::Relu(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(T::tanh);
        let ng = self.needs(a);
        self.push(value, Op::Tanh(a), ng)
    }

    /// Column-wise concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput)?;
        let rows = self.shape(first).0;
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(Error::shape("concat_cols: row counts differ"));
        }
        let views: Vec<ArrayView2<T>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts checked");
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Row-wise stacking of tensors with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput)?;
        let cols = self.shape(first).1;
        if parts.iter().any(|&p| self.shape(p).1 != cols) {
            return Err(Error::shape("concat_rows: column counts differ"));
        }
        let views: Vec<ArrayView2<T>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(0), &views).expect("column counts checked");
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Repeats a `1 × m` row `n` times.
    pub fn tile_rows(&mut self, row: Var, n: usize) -> Result<Var> {
        let (r, m) = self.shape(row);
        if r != 1 {
            return Err(Error::shape(format!("tile_rows: expected one row, got {r}")));
        }
        let value = self
            .value(row)
            .broadcast((n, m))
            .expect("single row broadcasts")
            .to_owned();
        let ng = self.needs(row);
        Ok(self.push(value, Op::TileRows(row), ng))
    }

    /// Per-column maximum over rows. Ties resolve to the first row.
    pub fn maxpool_rows(&mut self, a: Var) -> Result<Var> {
        let (value, arg) = maxpool_rows(self.value(a).view())?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::MaxPoolRows(a, arg), ng))
    }

    /// Per-column mean over rows, summed in sorted order so the result is
    /// bitwise independent of row order.
    pub fn avgpool_rows(&mut self, a: Var) -> Result<Var> {
        let value = avgpool_rows(self.value(a).view())?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::AvgPoolRows(a), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = T::of(self.value(a).len().max(1) as f64);
        let value = Array2::from_elem((1, 1), self.value(a).sum() / n);
        let ng = self.needs(a);
        self.push(value, Op::Mean(a), ng)
    }

    pub fn squared_norm(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).iter().map(|&x| x * x).sum());
        let ng = self.needs(a);
        self.push(value, Op::SquaredNorm(a), ng)
    }

    /// Mean clamped L1 distance between `pred` and a constant `target`.
    pub fn clamped_l1_mean(&mut self, pred: Var, target: Array2<T>, delta: T) -> Result<Var> {
        if self.shape(pred) != target.dim() {
            return Err(Error::shape(format!(
                "clamped_l1: {:?} vs {:?}",
                self.shape(pred),
                target.dim()
            )));
        }
        let n = T::of(target.len().max(1) as f64);
        let total: T = self
            .value(pred)
            .iter()
            .zip(target.iter())
            .map(|(&p, &t)| super::clamped_l1(p, t, delta))
            .sum();
        let ng = self.needs(pred);
        Ok(self.push(
            Array2::from_elem((1, 1), total / n),
            Op::ClampedL1 {
                pred,
                target,
                delta,
            },
            ng,
        ))
    }

    /// Mean squared error between two tensors of equal shape.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mse")?;
        let value = super::mse(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Array2::from_elem((1, 1), value), Op::Mse(a, b), ng))
    }

    /// Gradients of a scalar node with respect to every node that needs one.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::from_elem((1, 1), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        let mut params = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param { set, id } = node.op {
                if let Some(g) = grads[i].as_ref() {
                    params.push((set, id, g.clone()));
                }
            }
        }
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<T>, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let acc = |v: Var, delta: Array2<T>, grads: &mut [Option<Array2<T>>]| {
            if !self.needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Constant | Op::Variable | Op::Param { .. } => {}
            Op::MatMulT(a, b) => {
                if self.needs(*a) {
                    acc(*a, g.dot(self.value(*b)), grads);
                }
                if self.needs(*b) {
                    acc(*b, g.t().dot(self.value(*a)), grads);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone(), grads);
                acc(*b, g.clone(), grads);
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone(), grads);
                if self.needs(*row) {
                    acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)), grads);
                }
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone(), grads);
                acc(*b, g.mapv(|x| -x), grads);
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    acc(*a, g * self.value(*b), grads);
                }
                if self.needs(*b) {
                    acc(*b, g * self.value(*a), grads);
                }
            }
            Op::Scale(a, f) => acc(*a, g * *f, grads),
            Op::Relu(a) => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(*a), |d, &x| {
                    if x <= T::zero() {
                        *d = T::zero();
                    }
                });
                acc(*a, d, grads);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                d.zip_mut_with(&node.value, |d, &y| *d = *d * (T::one() - y * y));
                acc(*a, d, grads);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if self.needs(p) {
                        acc(p, g.slice(s![.., start..start + w]).to_owned(), grads);
                    }
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.shape(p).0;
                    if self.needs(p) {
                        acc(p, g.slice(s![start..start + h, ..]).to_owned(), grads);
                    }
                    start += h;
                }
            }
            Op::TileRows(row) => acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)), grads),
            Op::MaxPoolRows(a, arg) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                for (c, &r) in arg.iter().enumerate() {
                    d[[r, c]] = g[[0, c]];
                }
                acc(*a, d, grads);
            }
            Op::AvgPoolRows(a) => {
                let n = self.shape(*a).0;
                let inv = T::one() / T::of(n as f64);
                let d = g.broadcast(self.value(*a).raw_dim()).unwrap().mapv(|x| x * inv);
                acc(*a, d, grads);
            }
            Op::Sum(a) => {
                let d = Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                acc(*a, d, grads);
            }
            Op::Mean(a) => {
                let n = T::of(self.value(*a).len().max(1) as f64);
                let d = Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]] / n);
                acc(*a, d, grads);
            }
            Op::SquaredNorm(a) => {
                let two = T::of(2.0) * g[[0, 0]];
                acc(*a, self.value(*a).mapv(|x| two * x), grads);
            }
            Op::ClampedL1 {
                pred,
                target,
                delta,
            } => {
                let n = T::of(target.len().max(1) as f64);
                let scale = g[[0, 0]] / n;
                let mut d = Array2::zeros(target.raw_dim());
                ndarray::Zip::from(&mut d)
                    .and(self.value(*pred))
                    .and(target)
                    .for_each(|d, &p, &t| {
                        *d = scale * super::clamped_l1_slope(p, t, *delta);
                    });
                acc(*pred, d, grads);
            }
            Op::Mse(a, b) => {
                let n = T::of(self.value(*a).len().max(1) as f64);
                let diff = self.value(*a) - self.value(*b);
                let d = diff * (T::of(2.0) * g[[0, 0]] / n);
                if self.needs(*b) {
                    acc(*b, d.mapv(|x| -x), grads);
                }
                acc(*a, d, grads);
            }
        }
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
    params: Vec<(u64, ParamId, Array2<T>)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a node; `None` when the node does not influence the loss
    /// or does not depend on a trainable input.
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of a node, zeros when it is not on the path to the loss.
    pub fn get_or_zeros(&self, graph: &Graph<T>, v: Var) -> Array2<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(graph.value(v).raw_dim()))
    }

    /// Adds every recorded parameter gradient into `params` by tensor id,
    /// whichever set it was recorded from. Only meaningful when the graph used
    /// one set laid out like `params`.
    pub(crate) fn accumulate_by_id(&self, params: &mut ParameterSet<T>) -> Result<()> {
        for (_, id, g) in &self.params {
            if id.index() >= params.len() || params.grad(*id).dim() != g.dim() {
                return Err(Error::shape("gradient does not fit the parameter layout"));
            }
            *params.grad_mut(*id) += g;
        }
        Ok(())
    }

    /// Adds parameter gradients into the accumulators of `params`.
    pub fn accumulate(&self, params: &mut ParameterSet<T>) {
        let uid = params.uid();
        for (set, id, g) in &self.params {
            if *set == uid {
                *params.grad_mut(*id) += g;
            }
        }
    }
}

pub(crate) fn maxpool_rows<T: Scalar>(a: ArrayView2<T>) -> Result<(Array2<T>, Vec<usize>)> {
    let (n, m) = a.dim();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut value = Array2::zeros((1, m));
    let mut arg = vec![0usize; m];
    for c in 0..m {
        let col = a.column(c);
        let mut best = 0;
        for r in 1..n {
            if col[r] > col[best] {
                best = r;
            }
        }
        arg[c] = best;
        value[[0, c]] = col[best];
    }
    Ok((value, arg))
}

pub(crate) fn avgpool_rows<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let (n, m) = a.dim();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let count = T::of(n as f64);
    let mut value = Array2::zeros((1, m));
    let mut col: Vec<T> = Vec::with_capacity(n);
    for c in 0..m {
        col.clear();
        col.extend(a.column(c).iter().copied());
        col.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        // A constant column averages to its value exactly.
        value[[0, c]] = if col[0] == col[n - 1] {
            col[0]
        } else {
            col.iter().fold(T::zero(), |acc, &x| acc + x) / count
        };
    }
    Ok(value)
}
