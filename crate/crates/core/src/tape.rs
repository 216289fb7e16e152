//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] records every operation of a forward computation in
//! topological order; [`Tape::backward`] replays the records in reverse,
//! accumulating vector-Jacobian products. The op set is small but includes a
//! dense linear-system solve with its analytic adjoint, which is what lets a
//! whole PDE solve sit inside a differentiable computation.
//!
//! Conventions:
//! - no implicit broadcasting, except a one-element tensor against an array;
//! - every op validates shapes and checks its output for NaN/Inf;
//! - a tape is single-threaded; concurrent runs each own a private tape.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, LuFactors};
use crate::{fmath, Error, Result, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum UnaryKind {
    Neg,
    Exp,
    Tanh,
    Relu,
    Sigmoid,
    Sqrt,
    Square,
    Sin,
    Abs,
    /// y = c * x
    Scale(f64),
    /// y = x + c
    Offset(f64),
    /// y = lo + (hi - lo) * sigmoid(x)
    ScaledSigmoid { lo: f64, hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

pub(crate) enum Op {
    Leaf,
    Unary(UnaryKind, Var),
    Binary(BinaryKind, Var, Var),
    /// A [m,k] * B [k,n] or A [m,k] * b [k].
    Matmul(Var, Var),
    Transpose(Var),
    Sum(Var),
    Reshape(Var),
    /// out[k] = src[idx[k]].
    Gather { src: Var, idx: Arc<[usize]> },
    /// out[idx_s[k]] += src_s[k] over all sources; fixed output length.
    ScatterAdd { sources: Vec<(Var, Arc<[usize]>)> },
    /// x = A^-1 b with the LU factors of A saved for the adjoint solve.
    LinearSolve { a: Var, b: Var, lu: LuFactors },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    values: Vec<f64>,
    needs_grad: bool,
    trainable: bool,
}

/// Gradient accumulators produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v` if any reached it.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient for `v`, zeros if untouched by the backward pass.
    pub fn of(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }
}

/// Wengert list: append-only record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Register a non-trainable leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push_unchecked(Op::Leaf, t.shape().to_vec(), t.into_values(), false, false)
    }

    /// Register a trainable leaf; gradients are reported for it even if zero.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push_unchecked(Op::Leaf, t.shape().to_vec(), t.into_values(), true, true)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn values(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].values
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.values(v).to_vec()).expect("node shape")
    }

    pub fn item(&self, v: Var) -> Result<f64> {
        let vals = self.values(v);
        if vals.len() == 1 {
            Ok(vals[0])
        } else {
            Err(Error::invalid("item() on non-scalar node"))
        }
    }

    fn push_unchecked(
        &mut self,
        op: Op,
        shape: Vec<usize>,
        values: Vec<f64>,
        needs_grad: bool,
        trainable: bool,
    ) -> Var {
        self.nodes.push(Node {
            op,
            shape,
            values,
            needs_grad,
            trainable,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record an op after checking its output stays finite.
    fn push(
        &mut self,
        op_name: &'static str,
        op: Op,
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Var> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Unary(_, a) | Op::Sum(a) | Op::Reshape(a) | Op::Transpose(a) => {
                self.nodes[a.0].needs_grad
            }
            Op::Binary(_, a, b) | Op::Matmul(a, b) => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
            Op::Gather { src, .. } => self.nodes[src.0].needs_grad,
            Op::ScatterAdd { sources } => sources.iter().any(|(s, _)| self.nodes[s.0].needs_grad),
            Op::LinearSolve { a, b, .. } => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
        };
        Ok(self.push_unchecked(op, shape, values, needs_grad, false))
    }

    // ── Elementwise ops ─────────────────────────────────────────────

    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let name = match kind {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
            BinaryKind::Div => "div",
        };
        let (la, lb) = (self.values(a).len(), self.values(b).len());
        let compatible = la == lb || la == 1 || lb == 1;
        if !compatible {
            return Err(Error::ShapeMismatch {
                op: name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        if kind == BinaryKind::Div && self.values(b).iter().any(|&v| v == 0.0) {
            return Err(Error::DivisionByZero { op: "div" });
        }
        let out_shape = if la >= lb {
            self.shape(a).to_vec()
        } else {
            self.shape(b).to_vec()
        };
        let n = la.max(lb);
        let av = &self.nodes[a.0].values;
        let bv = &self.nodes[b.0].values;
        let mut out = Vec::with_capacity(n);
        let f = |x: f64, y: f64| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
            BinaryKind::Div => x / y,
        };
        if la == lb {
            out.extend(av.iter().zip(bv).map(|(&x, &y)| f(x, y)));
        } else if lb == 1 {
            let y = bv[0];
            out.extend(av.iter().map(|&x| f(x, y)));
        } else {
            let x = av[0];
            out.extend(bv.iter().map(|&y| f(x, y)));
        }
        self.push(name, Op::Binary(kind, a, b), out_shape, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Div, a, b)
    }

    fn unary(&mut self, kind: UnaryKind, a: Var) -> Result<Var> {
        let name = match kind {
            UnaryKind::Neg => "neg",
            UnaryKind::Exp => "exp",
            UnaryKind::Tanh => "tanh",
            UnaryKind::Relu => "relu",
            UnaryKind::Sigmoid => "sigmoid",
            UnaryKind::Sqrt => "sqrt",
            UnaryKind::Square => "square",
            UnaryKind::Sin => "sin",
            UnaryKind::Abs => "abs",
            UnaryKind::Scale(_) => "scale",
            UnaryKind::Offset(_) => "offset",
            UnaryKind::ScaledSigmoid { .. } => "scaled_sigmoid",
        };
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .map(|&x| match kind {
                UnaryKind::Neg => -x,
                UnaryKind::Exp => fmath::exp(x),
                UnaryKind::Tanh => fmath::tanh(x),
                UnaryKind::Relu => x.max(0.0),
                UnaryKind::Sigmoid => fmath::sigmoid(x),
                UnaryKind::Sqrt => fmath::sqrt(x),
                UnaryKind::Square => x * x,
                UnaryKind::Sin => fmath::sin(x),
                UnaryKind::Abs => x.abs(),
                UnaryKind::Scale(c) => c * x,
                UnaryKind::Offset(c) => x + c,
                UnaryKind::ScaledSigmoid { lo, hi } => lo + (hi - lo) * fmath::sigmoid(x),
            })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(name, Op::Unary(kind, a), shape, out)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Neg, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Exp, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Relu, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Sigmoid, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Sqrt, a)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Square, a)
    }

    pub fn sin(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Sin, a)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Abs, a)
    }

    /// y = c * x with a plain constant (not a node).
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(UnaryKind::Scale(c), a)
    }

    /// y = x + c with a plain constant.
    pub fn offset(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(UnaryKind::Offset(c), a)
    }

    /// y = lo + (hi - lo) * sigmoid(x); output stays strictly inside (lo, hi).
    pub fn scaled_sigmoid(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if !(lo < hi) {
            return Err(Error::invalid(alloc::format!(
                "scaled_sigmoid bounds inverted: ({lo}, {hi})"
            )));
        }
        self.unary(UnaryKind::ScaledSigmoid { lo, hi }, a)
    }

    // ── Structural ops ──────────────────────────────────────────────

    /// Matrix product `[m,k] x [k,n] -> [m,n]`, or matrix-vector
    /// `[m,k] x [k] -> [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let (m, k) = match sa[..] {
            [m, k] => (m, k),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "matmul",
                    lhs: sa,
                    rhs: sb,
                })
            }
        };
        let (n, out_shape) = match sb[..] {
            [kb, n] if kb == k => (n, vec![m, n]),
            [kb] if kb == k => (1, vec![m]),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "matmul",
                    lhs: sa,
                    rhs: sb,
                })
            }
        };
        let out = linalg::matmul(&self.nodes[a.0].values, &self.nodes[b.0].values, m, k, n);
        self.push("matmul", Op::Matmul(a, b), out_shape, out)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let (m, n) = match sa[..] {
            [m, n] => (m, n),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "transpose",
                    lhs: sa,
                    rhs: vec![],
                })
            }
        };
        let out = linalg::transpose(&self.nodes[a.0].values, m, n);
        self.push("transpose", Op::Transpose(a), vec![n, m], out)
    }

    /// Full reduction to a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s: f64 = self.nodes[a.0].values.iter().sum();
        self.push("sum", Op::Sum(a), vec![1], vec![s])
    }

    /// Arithmetic mean over all elements.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.values(a).len();
        if n == 0 {
            return Err(Error::invalid("mean of empty tensor"));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != self.values(a).len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(a).to_vec(),
                rhs: shape,
            });
        }
        let values = self.nodes[a.0].values.clone();
        self.push("reshape", Op::Reshape(a), shape, values)
    }

    /// out[k] = src[idx[k]], flattening src. Output is 1-D.
    pub fn gather(&mut self, src: Var, idx: impl Into<Arc<[usize]>>) -> Result<Var> {
        let idx: Arc<[usize]> = idx.into();
        let n = idx.len();
        self.gather_shaped(src, idx, vec![n])
    }

    /// Gather with an explicit output shape (`shape` must match `idx.len()`).
    pub fn gather_shaped(
        &mut self,
        src: Var,
        idx: impl Into<Arc<[usize]>>,
        shape: impl Into<Vec<usize>>,
    ) -> Result<Var> {
        let idx: Arc<[usize]> = idx.into();
        let shape = shape.into();
        let src_len = self.values(src).len();
        if idx.iter().any(|&i| i >= src_len) {
            return Err(Error::invalid("gather index out of range"));
        }
        if shape.iter().product::<usize>() != idx.len() {
            return Err(Error::ShapeMismatch {
                op: "gather",
                lhs: vec![idx.len()],
                rhs: shape,
            });
        }
        let sv = &self.nodes[src.0].values;
        let out: Vec<f64> = idx.iter().map(|&i| sv[i]).collect();
        self.push("gather", Op::Gather { src, idx }, shape, out)
    }

    /// Scatter-accumulate several sources into a fresh zero vector of length
    /// `out_len`: `out[idx[k]] += src[k]` for every (src, idx) pair in order.
    pub fn scatter_add(
        &mut self,
        sources: Vec<(Var, Arc<[usize]>)>,
        out_len: usize,
    ) -> Result<Var> {
        self.scatter_add_shaped(sources, out_len, vec![out_len])
    }

    /// [`Tape::scatter_add`] with an explicit output shape.
    pub fn scatter_add_shaped(
        &mut self,
        sources: Vec<(Var, Arc<[usize]>)>,
        out_len: usize,
        shape: Vec<usize>,
    ) -> Result<Var> {
        if shape.iter().product::<usize>() != out_len {
            return Err(Error::ShapeMismatch {
                op: "scatter_add",
                lhs: vec![out_len],
                rhs: shape,
            });
        }
        let mut out = vec![0.0; out_len];
        for (src, idx) in &sources {
            let sv = &self.nodes[src.0].values;
            if sv.len() != idx.len() {
                return Err(Error::ShapeMismatch {
                    op: "scatter_add",
                    lhs: vec![sv.len()],
                    rhs: vec![idx.len()],
                });
            }
            if idx.iter().any(|&i| i >= out_len) {
                return Err(Error::invalid("scatter_add index out of range"));
            }
            for (&v, &i) in sv.iter().zip(idx.iter()) {
                out[i] += v;
            }
        }
        self.push("scatter_add", Op::ScatterAdd { sources }, shape, out)
    }

    /// Solve the dense square system `A x = b`.
    ///
    /// Backward rule: solve `A^T s = x_bar`, then `b_bar += s` and
    /// `A_bar -= s x^T`.
    pub fn linear_solve(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let n = match sa[..] {
            [r, c] if r == c => r,
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "linear_solve",
                    lhs: sa,
                    rhs: sb,
                })
            }
        };
        if sb[..] != [n] {
            return Err(Error::ShapeMismatch {
                op: "linear_solve",
                lhs: sa,
                rhs: sb,
            });
        }
        let lu = linalg::lu_factor(&self.nodes[a.0].values, n)?;
        let x = lu.solve(&self.nodes[b.0].values);
        self.push("linear_solve", Op::LinearSolve { a, b, lu }, vec![n], x)
    }

    /// Least-squares solve of an `m x n` system (m >= n) via the normal
    /// equations `A^T A x = A^T b`, so the adjoint composes from existing
    /// rules.
    pub fn lstsq_solve(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        match (&sa[..], &sb[..]) {
            ([m, n], [mb]) if mb == m && m >= n => {}
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "lstsq_solve",
                    lhs: sa,
                    rhs: sb,
                })
            }
        }
        let at = self.transpose(a)?;
        let ata = self.matmul(at, a)?;
        let atb = self.matmul(at, b)?;
        self.linear_solve(ata, atb)
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Visits each node once, accumulating
    /// (never overwriting) parent gradients. Leaves marked trainable report
    /// zeros when no gradient reaches them.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.values(loss).len() != 1 {
            return Err(Error::invalid("backward: loss must be scalar"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad && !self.nodes[i].trainable {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        // Untouched trainable leaves report zero.
        for (i, node) in self.nodes.iter().enumerate() {
            if node.trainable && grads[i].is_none() {
                grads[i] = Some(vec![0.0; node.values.len()]);
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.shape.clone()).collect(),
        })
    }

    fn wants(&self, v: Var) -> bool {
        let n = &self.nodes[v.0];
        n.needs_grad || n.trainable
    }

    fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, contrib: impl Iterator<Item = f64>) {
        let slot = &mut grads[v.0];
        match slot {
            Some(g) => {
                for (dst, c) in g.iter_mut().zip(contrib) {
                    *dst += c;
                }
            }
            None => *slot = Some(contrib.collect()),
        }
    }

    /// Accumulate into a binary operand that may have been scalar-broadcast.
    fn accumulate_operand(
        grads: &mut [Option<Vec<f64>>],
        operand: Var,
        operand_len: usize,
        contrib: &mut dyn Iterator<Item = f64>,
    ) {
        if operand_len == 1 {
            let total: f64 = contrib.sum();
            Tape::accumulate(grads, operand, core::iter::once(total));
        } else {
            Tape::accumulate(grads, operand, contrib);
        }
    }

    fn backward_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Unary(kind, a) => {
                if !self.wants(*a) {
                    return;
                }
                let x = &self.nodes[a.0].values;
                let y = &self.nodes[i].values;
                let contrib = g.iter().enumerate().map(|(j, &gj)| match kind {
                    UnaryKind::Neg => -gj,
                    UnaryKind::Exp => gj * y[j],
                    UnaryKind::Tanh => gj * (1.0 - y[j] * y[j]),
                    UnaryKind::Relu => {
                        if x[j] > 0.0 {
                            gj
                        } else {
                            0.0
                        }
                    }
                    UnaryKind::Sigmoid => gj * y[j] * (1.0 - y[j]),
                    UnaryKind::Sqrt => gj / (2.0 * y[j]),
                    UnaryKind::Square => gj * 2.0 * x[j],
                    UnaryKind::Sin => gj * fmath::cos(x[j]),
                    UnaryKind::Abs => {
                        gj * if x[j] > 0.0 {
                            1.0
                        } else if x[j] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    UnaryKind::Scale(c) => gj * c,
                    UnaryKind::Offset(_) => gj,
                    UnaryKind::ScaledSigmoid { lo, hi } => {
                        let s = (y[j] - lo) / (hi - lo);
                        gj * (hi - lo) * s * (1.0 - s)
                    }
                });
                Tape::accumulate(grads, *a, contrib);
            }
            Op::Binary(kind, a, b) => {
                let av = &self.nodes[a.0].values;
                let bv = &self.nodes[b.0].values;
                let (la, lb) = (av.len(), bv.len());
                let pick = |v: &[f64], j: usize| if v.len() == 1 { v[0] } else { v[j] };
                if self.wants(*a) {
                    let mut contrib = g.iter().enumerate().map(|(j, &gj)| match kind {
                        BinaryKind::Add | BinaryKind::Sub => gj,
                        BinaryKind::Mul => gj * pick(bv, j),
                        BinaryKind::Div => gj / pick(bv, j),
                    });
                    Tape::accumulate_operand(grads, *a, la, &mut contrib);
                }
                if self.wants(*b) {
                    let yv = &self.nodes[i].values;
                    let mut contrib = g.iter().enumerate().map(|(j, &gj)| match kind {
                        BinaryKind::Add => gj,
                        BinaryKind::Sub => -gj,
                        BinaryKind::Mul => gj * pick(av, j),
                        // d(a/b)/db = -y/b with y = a/b.
                        BinaryKind::Div => -gj * yv[j] / pick(bv, j),
                    });
                    Tape::accumulate_operand(grads, *b, lb, &mut contrib);
                }
            }
            Op::Matmul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let bv = &self.nodes[b.0].values;
                let av = &self.nodes[a.0].values;
                let n = if self.nodes[b.0].shape.len() == 2 {
                    self.nodes[b.0].shape[1]
                } else {
                    1
                };
                if self.wants(*a) {
                    // A_bar += g * B^T, with B as [k, n] and g as [m, n].
                    let da = linalg::matmul_a_bt(g, bv, m, n, k);
                    Tape::accumulate(grads, *a, da.into_iter());
                }
                if self.wants(*b) {
                    // B_bar += A^T * g.
                    let db = linalg::matmul_at_b(av, g, m, k, n);
                    Tape::accumulate(grads, *b, db.into_iter());
                }
            }
            Op::Transpose(a) => {
                if !self.wants(*a) {
                    return;
                }
                let (n, m) = (self.nodes[i].shape[0], self.nodes[i].shape[1]);
                let da = linalg::transpose(g, n, m);
                Tape::accumulate(grads, *a, da.into_iter());
            }
            Op::Sum(a) => {
                if !self.wants(*a) {
                    return;
                }
                let n = self.nodes[a.0].values.len();
                let gj = g[0];
                Tape::accumulate(grads, *a, core::iter::repeat(gj).take(n));
            }
            Op::Reshape(a) => {
                if !self.wants(*a) {
                    return;
                }
                Tape::accumulate(grads, *a, g.iter().copied());
            }
            Op::Gather { src, idx } => {
                if !self.wants(*src) {
                    return;
                }
                let n = self.nodes[src.0].values.len();
                let mut dsrc = vec![0.0; n];
                for (k, &j) in idx.iter().enumerate() {
                    dsrc[j] += g[k];
                }
                Tape::accumulate(grads, *src, dsrc.into_iter());
            }
            Op::ScatterAdd { sources } => {
                for (src, idx) in sources {
                    if !self.wants(*src) {
                        continue;
                    }
                    let contrib = idx.iter().map(|&j| g[j]);
                    Tape::accumulate(grads, *src, contrib);
                }
            }
            Op::LinearSolve { a, b, lu } => {
                // s solves A^T s = x_bar.
                let s = lu.solve_transpose(g);
                if self.wants(*b) {
                    Tape::accumulate(grads, *b, s.iter().copied());
                }
                if self.wants(*a) {
                    let x = &self.nodes[i].values;
                    let n = x.len();
                    let da = (0..n * n).map(|p| -s[p / n] * x[p % n]);
                    Tape::accumulate(grads, *a, da);
                }
            }
        }
    }
}

/// Finite-difference gradient checker.
///
/// Runs `f` once on a tape to get reverse-mode gradients at `x0`, then
/// compares against central differences computed from plain forward
/// evaluations, component by component. Reports the maximum of
/// `|tape - fd| / max(|fd|, 1e-12)`.
pub struct GradCheck {
    pub h: f64,
}

impl GradCheck {
    pub fn new(h: f64) -> Self {
        GradCheck { h }
    }

    pub fn run<F>(&self, f: F, x0: &[Tensor]) -> Result<f64>
    where
        F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    {
        let mut tape = Tape::new();
        let vars: Vec<Var> = x0.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        if tape.values(loss).len() != 1 {
            return Err(Error::invalid("grad_check: f must return a scalar"));
        }
        let grads = tape.backward(loss)?;
        let tape_grads: Vec<Tensor> = vars.iter().map(|&v| grads.of(v)).collect();

        let eval = |inputs: &[Tensor]| -> Result<f64> {
            let mut t = Tape::new();
            let vs: Vec<Var> = inputs.iter().map(|x| t.param(x.clone())).collect();
            let out = f(&mut t, &vs)?;
            let y = t.item(out)?;
            if !y.is_finite() {
                return Err(Error::NonFinite { op: "grad_check" });
            }
            Ok(y)
        };

        let mut max_rel = 0.0_f64;
        let mut work: Vec<Tensor> = x0.to_vec();
        for (ti, t0) in x0.iter().enumerate() {
            for j in 0..t0.len() {
                let orig = t0.values()[j];
                work[ti].values_mut()[j] = orig + self.h;
                let fp = eval(&work)?;
                work[ti].values_mut()[j] = orig - self.h;
                let fm = eval(&work)?;
                work[ti].values_mut()[j] = orig;
                let fd = (fp - fm) / (2.0 * self.h);
                let tg = tape_grads[ti].values()[j];
                let rel = (tg - fd).abs() / fd.abs().max(1e-12);
                max_rel = max_rel.max(rel);
            }
        }
        Ok(max_rel)
    }
}
