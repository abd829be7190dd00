//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records every operation in execution order, so node indices are
//! already a topological order. [`Tape::backward`] walks them once in reverse,
//! accumulating vector-Jacobian products into fresh adjoint buffers; the tape
//! itself is never mutated, so repeated passes are bitwise identical.
//!
//! Every value is an `Array2<f64>`. Scalars are `1×1`, per-row quantities are
//! `N×1`. Binary elementwise ops require equal shapes; use
//! [`Tape::broadcast`] to expand explicitly.

mod gradcheck;
mod params;

use std::rc::Rc;

use ndarray::{s, Array2, Axis, Zip};

pub use gradcheck::{check_gradients, GradCheck};
pub use params::{ParamId, ParamStore, Parameter};

use crate::special;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Neg,
    /// `max(x, 0)`.
    Relu,
    Tanh,
    Sigmoid,
    Cosh,
    Sinh,
    /// Argument clamped below at 1.
    Acosh,
    /// Radicand clamped at 0.
    Sqrt,
    Exp,
    Ln,
    Recip,
    Softplus,
    /// `sinh(√w)/√w`
    SinhcSqrt,
    /// `asinh(√w)/√w`
    AsinhcSqrt,
    /// `tanh(√w)/√w`
    TanhcSqrt,
    /// `acosh(1+δ)²`, `δ` clamped at 0.
    Acosh1pSq,
}

impl Unary {
    fn name(self) -> &'static str {
        match self {
            Unary::Neg => "neg",
            Unary::Relu => "relu",
            Unary::Tanh => "tanh",
            Unary::Sigmoid => "sigmoid",
            Unary::Cosh => "cosh",
            Unary::Sinh => "sinh",
            Unary::Acosh => "acosh",
            Unary::Sqrt => "sqrt",
            Unary::Exp => "exp",
            Unary::Ln => "ln",
            Unary::Recip => "recip",
            Unary::Softplus => "softplus",
            Unary::SinhcSqrt => "sinhc_sqrt",
            Unary::AsinhcSqrt => "asinhc_sqrt",
            Unary::TanhcSqrt => "tanhc_sqrt",
            Unary::Acosh1pSq => "acosh1p_sq",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Neg => -x,
            Unary::Relu => x.max(0.0),
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => special::sigmoid(x),
            Unary::Cosh => x.cosh(),
            Unary::Sinh => x.sinh(),
            Unary::Acosh => x.max(1.0).acosh(),
            Unary::Sqrt => x.max(0.0).sqrt(),
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Recip => 1.0 / x,
            Unary::Softplus => special::softplus(x),
            Unary::SinhcSqrt => special::sinhc_sqrt(x),
            Unary::AsinhcSqrt => special::asinhc_sqrt(x),
            Unary::TanhcSqrt => special::tanhc_sqrt(x),
            Unary::Acosh1pSq => special::acosh1p_sq(x),
        }
    }

    /// Derivative given input `x` and output `y`.
    fn deriv(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Neg => -1.0,
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Tanh => 1.0 - y * y,
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Cosh => x.sinh(),
            Unary::Sinh => x.cosh(),
            Unary::Acosh => {
                if x <= 1.0 {
                    0.0
                } else {
                    1.0 / ((x - 1.0) * (x + 1.0)).sqrt()
                }
            }
            Unary::Sqrt => {
                if x <= 0.0 {
                    0.0
                } else {
                    0.5 / y
                }
            }
            Unary::Exp => y,
            Unary::Ln => 1.0 / x,
            Unary::Recip => -y * y,
            Unary::Softplus => special::sigmoid(x),
            Unary::SinhcSqrt => special::sinhc_sqrt_deriv(x),
            Unary::AsinhcSqrt => special::asinhc_sqrt_deriv(x),
            Unary::TanhcSqrt => special::tanhc_sqrt_deriv(x),
            Unary::Acosh1pSq => special::acosh1p_sq_deriv(x),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Broadcast(Var),
    Unary(Var, Unary),
    SoftmaxRows(Var),
    SegmentSoftmax { x: Var, seg: Rc<Vec<usize>> },
    Gather { x: Var, idx: Rc<Vec<usize>> },
    ScatterAdd { x: Var, idx: Rc<Vec<usize>> },
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    RowSum(Var),
    SumAll(Var),
    MinkowskiRows(Var, Var),
    CrossEntropy { logits: Var, labels: Rc<Vec<usize>> },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param(_) => vec![],
            Op::MatMul(a, b)
            | Op::MatMulT(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::MinkowskiRows(a, b) => vec![*a, *b],
            Op::Scale(a, _) | Op::Offset(a) | Op::Broadcast(a) | Op::Unary(a, _) | Op::SoftmaxRows(a) => vec![*a],
            Op::SegmentSoftmax { x, .. }
            | Op::Gather { x, .. }
            | Op::ScatterAdd { x, .. }
            | Op::SliceCols { x, .. } => vec![*x],
            Op::RowSum(a) | Op::SumAll(a) => vec![*a],
            Op::ConcatCols(parts) => parts.clone(),
            Op::CrossEntropy { logits, .. } => vec![*logits],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::Broadcast(..) => "broadcast",
            Op::Unary(_, u) => u.name(),
            Op::SoftmaxRows(..) => "softmax",
            Op::SegmentSoftmax { .. } => "segment_softmax",
            Op::Gather { .. } => "gather_rows",
            Op::ScatterAdd { .. } => "scatter_add_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::RowSum(..) => "row_sum",
            Op::SumAll(..) => "sum",
            Op::MinkowskiRows(..) => "minkowski_inner",
            Op::CrossEntropy { .. } => "softmax_cross_entropy",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    /// Whether any differentiable leaf feeds this node.
    live: bool,
}

/// Records a computation for reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    scope: String,
}

/// Adjoints produced by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Array2<f64>>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` when `v` does not influence the loss.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.adjoints[v.0].as_ref()
    }

    /// Adds parameter adjoints into the store's gradient buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.adjoints[node] {
                let p = store.get_mut(id);
                if p.grad.dim() != p.value.dim() {
                    p.grad = Array2::zeros(p.value.dim());
                }
                p.grad += g;
            }
        }
    }
}

fn dims(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Label attached to forward-pass errors (e.g. `"layer 2"`).
    pub fn set_scope(&mut self, scope: impl Into<String>) {
        self.scope = scope.into();
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        dims(&self.nodes[v.0].value)
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Result<Var> {
        let live = op.inputs().iter().any(|v| self.nodes[v.0].live) || matches!(op, Op::Param(_));
        self.push_with(value, op, live)
    }

    fn push_with(&mut self, value: Array2<f64>, op: Op, live: bool) -> Result<Var> {
        if value.iter().any(|x| !x.is_finite()) {
            let context = if self.scope.is_empty() {
                String::new()
            } else {
                format!(" in {}", self.scope)
            };
            return Err(Error::NanForward {
                op: op.name(),
                node: self.nodes.len(),
                context,
            });
        }
        self.nodes.push(Node { value, op, live });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    /// A leaf that receives no adjoint.
    pub fn constant(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push_with(value, Op::Leaf, false)
    }

    /// A leaf whose adjoint is reported by [`Gradients::wrt`].
    pub fn variable(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push_with(value, Op::Leaf, true)
    }

    pub fn scalar_const(&mut self, x: f64) -> Result<Var> {
        self.constant(Array2::from_elem((1, 1), x))
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Shape { op: "matmul", lhs: sa, rhs: sb });
        }
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`, the usual layout for `x · Wᵀ` with `W: [out × in]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(Error::Shape { op: "matmul_t", lhs: sa, rhs: sb });
        }
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("div", a, b)?;
        let v = self.value(a) / self.value(b);
        self.push(v, Op::Div(a, b))
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    /// Addition of a constant.
    pub fn offset(&mut self, a: Var, k: f64) -> Result<Var> {
        let v = self.value(a) + k;
        self.push(v, Op::Offset(a))
    }

    /// Expands a `1×1`, `N×1` or `1×D` node to `rows × cols`.
    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if (r != rows && r != 1) || (c != cols && c != 1) {
            return Err(Error::Shape {
                op: "broadcast",
                lhs: (r, c),
                rhs: (rows, cols),
            });
        }
        if (r, c) == (rows, cols) {
            return Ok(a);
        }
        let v = self
            .value(a)
            .broadcast((rows, cols))
            .expect("checked above")
            .to_owned();
        self.push(v, Op::Broadcast(a))
    }

    /// `a * b` where `b` is broadcast to `a`'s shape.
    pub fn mul_bcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        let b = self.broadcast(b, r, c)?;
        self.mul(a, b)
    }

    /// `a + b` where `b` is broadcast to `a`'s shape.
    pub fn add_bcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        let b = self.broadcast(b, r, c)?;
        self.add(a, b)
    }

    pub fn unary(&mut self, a: Var, f: Unary) -> Result<Var> {
        if f == Unary::Acosh && self.value(a).iter().any(|&x| x < 1.0 - 1e-8) {
            return Err(Error::Degenerate {
                op: "acosh",
                detail: "argument below 1 beyond rounding".into(),
            });
        }
        let v = self.value(a).mapv(|x| f.apply(x));
        self.push(v, Op::Unary(a, f))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Sqrt)
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Recip)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            row /= z;
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Softmax of an `E×1` column within groups: entries sharing `seg[e]`
    /// are normalised together.
    pub fn segment_softmax(&mut self, a: Var, seg: Rc<Vec<usize>>, n_seg: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if c != 1 || r != seg.len() {
            return Err(Error::Shape {
                op: "segment_softmax",
                lhs: (r, c),
                rhs: (seg.len(), 1),
            });
        }
        let x = self.value(a);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (e, &s) in seg.iter().enumerate() {
            max[s] = max[s].max(x[[e, 0]]);
        }
        let mut v = Array2::zeros((r, 1));
        let mut z = vec![0.0; n_seg];
        for (e, &s) in seg.iter().enumerate() {
            let ex = (x[[e, 0]] - max[s]).exp();
            v[[e, 0]] = ex;
            z[s] += ex;
        }
        for (e, &s) in seg.iter().enumerate() {
            v[[e, 0]] /= z[s];
        }
        self.push(v, Op::SegmentSoftmax { x: a, seg })
    }

    /// Row selection: `out[k] = a[idx[k]]`.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var> {
        let x = self.value(a);
        let (r, c) = dims(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::Shape {
                op: "gather_rows",
                lhs: (r, c),
                rhs: (bad, c),
            });
        }
        let v = x.select(Axis(0), &idx);
        self.push(v, Op::Gather { x: a, idx })
    }

    /// Row accumulation: `out[idx[k]] += a[k]`, with `n_out` output rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Rc<Vec<usize>>, n_out: usize) -> Result<Var> {
        let x = self.value(a);
        let (r, c) = dims(x);
        if r != idx.len() || idx.iter().any(|&i| i >= n_out) {
            return Err(Error::Shape {
                op: "scatter_add_rows",
                lhs: (r, c),
                rhs: (idx.len(), n_out),
            });
        }
        let mut v = Array2::zeros((n_out, c));
        for (k, &i) in idx.iter().enumerate() {
            let mut dst = v.row_mut(i);
            dst += &x.row(k);
        }
        self.push(v, Op::ScatterAdd { x: a, idx })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: (rows, cols),
                    rhs: (r, c),
                });
            }
            cols += c;
        }
        let mut v = Array2::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let c = self.shape(p).1;
            v.slice_mut(s![.., at..at + c]).assign(self.value(p));
            at += c;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start > end || end > c {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: (r, c),
                rhs: (start, end),
            });
        }
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols { x: a, start })
    }

    /// `N×D → N×1`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::RowSum(a))
    }

    /// Sum of all entries, `1×1`.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    /// `N×(n+1), N×(n+1) → N×1` row-wise Minkowski inner products.
    pub fn minkowski_inner(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("minkowski_inner", a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let mut v = Array2::zeros((x.nrows(), 1));
        Zip::from(v.rows_mut())
            .and(x.rows())
            .and(y.rows())
            .for_each(|mut o, xr, yr| {
                o[0] = crate::lorentz::inner_unchecked(xr, yr);
            });
        self.push(v, Op::MinkowskiRows(a, b))
    }

    /// Mean softmax cross-entropy over rows, `1×1`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: Rc<Vec<usize>>) -> Result<Var> {
        let (r, c) = self.shape(logits);
        if r != labels.len() || labels.iter().any(|&l| l >= c) || r == 0 {
            return Err(Error::Shape {
                op: "softmax_cross_entropy",
                lhs: (r, c),
                rhs: (labels.len(), 1),
            });
        }
        let x = self.value(logits);
        let mut total = 0.0;
        for (row, &l) in x.rows().into_iter().zip(labels.iter()) {
            let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
            total += lse - row[l];
        }
        let v = Array2::from_elem((1, 1), total / r as f64);
        self.push(v, Op::CrossEntropy { logits, labels })
    }

    /// Reverse pass from a `1×1` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                lhs: shape,
                rhs: (1, 1),
            });
        }
        if !self.scalar(loss).is_finite() {
            return Err(Error::NanGradient {
                op: self.nodes[loss.0].op.name(),
                node: loss.0,
            });
        }
        let n = loss.0 + 1;
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Array2::ones((1, 1)));
        let mut params = Vec::new();

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.live {
                continue;
            }
            let name = node.op.name();
            let live = |v: &Var| self.nodes[v.0].live;
            let send = |adj: &mut Vec<Option<Array2<f64>>>, to: Var, d: Array2<f64>| -> Result<()> {
                if !self.nodes[to.0].live {
                    return Ok(());
                }
                if d.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NanGradient { op: name, node: i });
                }
                match &mut adj[to.0] {
                    Some(acc) => *acc += &d,
                    slot @ None => *slot = Some(d),
                }
                Ok(())
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => params.push((*id, i)),
                Op::MatMul(a, b) => {
                    if live(a) {
                        send(&mut adj, *a, g.dot(&self.value(*b).t()))?;
                    }
                    if live(b) {
                        send(&mut adj, *b, self.value(*a).t().dot(&g))?;
                    }
                }
                Op::MatMulT(a, b) => {
                    if live(a) {
                        send(&mut adj, *a, g.dot(self.value(*b)))?;
                    }
                    if live(b) {
                        send(&mut adj, *b, g.t().dot(self.value(*a)))?;
                    }
                }
                Op::Add(a, b) => {
                    send(&mut adj, *a, g.clone())?;
                    send(&mut adj, *b, g.clone())?;
                }
                Op::Sub(a, b) => {
                    send(&mut adj, *a, g.clone())?;
                    send(&mut adj, *b, -&g)?;
                }
                Op::Mul(a, b) => {
                    send(&mut adj, *a, &g * self.value(*b))?;
                    send(&mut adj, *b, &g * self.value(*a))?;
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    send(&mut adj, *a, &g / bv)?;
                    let db = -(&g * &node.value) / bv;
                    send(&mut adj, *b, db)?;
                }
                Op::Scale(a, k) => send(&mut adj, *a, &g * *k)?,
                Op::Offset(a) => send(&mut adj, *a, g.clone())?,
                Op::Broadcast(a) => {
                    let (r, c) = self.shape(*a);
                    let mut d = g.clone();
                    if r == 1 {
                        d = d.sum_axis(Axis(0)).insert_axis(Axis(0));
                    }
                    if c == 1 {
                        d = d.sum_axis(Axis(1)).insert_axis(Axis(1));
                    }
                    send(&mut adj, *a, d)?;
                }
                Op::Unary(a, f) => {
                    let mut d = g.clone();
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .and(&node.value)
                        .for_each(|d, &x, &y| *d *= f.deriv(x, y));
                    send(&mut adj, *a, d)?;
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = &g * y;
                    let dots = d.sum_axis(Axis(1));
                    Zip::from(d.rows_mut())
                        .and(y.rows())
                        .and(&dots)
                        .for_each(|mut dr, yr, &dot| dr.scaled_add(-dot, &yr));
                    send(&mut adj, *a, d)?;
                }
                Op::SegmentSoftmax { x, seg } => {
                    let y = &node.value;
                    let n_seg = seg.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![0.0; n_seg];
                    for (e, &s) in seg.iter().enumerate() {
                        dot[s] += g[[e, 0]] * y[[e, 0]];
                    }
                    let mut d = Array2::zeros(y.dim());
                    for (e, &s) in seg.iter().enumerate() {
                        d[[e, 0]] = y[[e, 0]] * (g[[e, 0]] - dot[s]);
                    }
                    send(&mut adj, *x, d)?;
                }
                Op::Gather { x, idx } => {
                    let (r, c) = self.shape(*x);
                    let mut d = Array2::zeros((r, c));
                    for (k, &src) in idx.iter().enumerate() {
                        let mut row = d.row_mut(src);
                        row += &g.row(k);
                    }
                    send(&mut adj, *x, d)?;
                }
                Op::ScatterAdd { x, idx } => {
                    let d = g.select(Axis(0), idx);
                    send(&mut adj, *x, d)?;
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let c = self.shape(p).1;
                        send(&mut adj, p, g.slice(s![.., at..at + c]).to_owned())?;
                        at += c;
                    }
                }
                Op::SliceCols { x, start } => {
                    let (r, c) = self.shape(*x);
                    let mut d = Array2::zeros((r, c));
                    let w = g.ncols();
                    d.slice_mut(s![.., *start..*start + w]).assign(&g);
                    send(&mut adj, *x, d)?;
                }
                Op::RowSum(a) => {
                    let (r, c) = self.shape(*a);
                    let d = g.broadcast((r, c)).expect("N×1 to N×D").to_owned();
                    send(&mut adj, *a, d)?;
                }
                Op::SumAll(a) => {
                    let d = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    send(&mut adj, *a, d)?;
                }
                Op::MinkowskiRows(a, b) => {
                    let eta = |m: &Array2<f64>| {
                        let mut m = m * &g;
                        m.column_mut(0).mapv_inplace(|x| -x);
                        m
                    };
                    let da = eta(self.value(*b));
                    let db = eta(self.value(*a));
                    send(&mut adj, *a, da)?;
                    send(&mut adj, *b, db)?;
                }
                Op::CrossEntropy { logits, labels } => {
                    let x = self.value(*logits);
                    let rows = x.nrows() as f64;
                    let mut d = x.clone();
                    for (mut row, &l) in d.rows_mut().into_iter().zip(labels.iter()) {
                        let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                        row.mapv_inplace(|v| (v - m).exp());
                        let z = row.sum();
                        row /= z;
                        row[l] -= 1.0;
                    }
                    d *= g[[0, 0]] / rows;
                    send(&mut adj, *logits, d)?;
                }
            }
            adj[i] = Some(g);
        }
        params.reverse();
        Ok(Gradients {
            adjoints: adj,
            params,
        })
    }
}
