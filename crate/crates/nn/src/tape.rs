//! Reverse-mode differentiation over a recorded tape.
//!
//! Every operation appends a node holding its value; `backward` walks the
//! tape in reverse. Parameters are borrowed rather than copied, so a tape is
//! tied to the parameter sets it reads. Gradients only flow into nodes that
//! (transitively) depend on a [`Tape::param`] leaf. A fresh tape is built for
//! every forward pass; gradients are returned, never accumulated in place.
//!
//! Shape mismatches are programming errors and panic.

use std::borrow::Cow;
use std::cell::{Ref, RefCell};
use std::rc::Rc;

use crate::tensor::{gemm, Op as G, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("backward needs a 1x1 loss, got {0}x{1}")]
    NonScalarLoss(usize, usize),
    #[error("shape mismatch for {name}: {expected:?} vs {found:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("parameter sets differ: {0}")]
    Layout(String),
}

/// `(row, column)` positions.
pub type Picks = Rc<[(u32, u32)]>;
pub type Index = Rc<[usize]>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `x + b` with `b` a `1 x c` row broadcast over rows.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Square(Var),
    SumAll(Var),
    MeanAll(Var),
    ConcatCols(Vec<Var>),
    /// `out[e] = x[idx[e]]`
    Gather(Var, Index),
    /// `out[idx[e]] += x[e]`
    ScatterSum(Var, Index),
    /// softmax of an `E x 1` score within each segment
    SegmentSoftmax(Var, Index, usize),
    /// `out[e, :] = w[e] * x[e, :]` for an `E x 1` weight
    RowScale(Var, Var),
    /// per-segment row mean
    SegmentMean(Var, Index, Rc<[usize]>),
    /// `out[p] = h[r_p] . w[c_p] + b[c_p]` with `w` stored one row per column pick
    SelectDense(Var, Var, Var, Picks),
    /// `out[r_p, :] += v[p] * w[c_p, :]`
    SparseDense(Var, Var, Picks),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'p> {
    nodes: RefCell<Vec<Node<'p>>>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(s) => s.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn accumulate_with(slot: &mut Option<Tensor>, rows: usize, cols: usize, f: impl FnOnce(&mut Tensor)) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(rows, cols));
    f(t);
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Cow<'p, Tensor>, op: Op, needs_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, needs_grad });
        Var(nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].needs_grad)
    }

    fn unary(&self, x: Var, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var {
        let value = f(&self.value(x));
        let ng = self.needs(&[x]);
        self.push(Cow::Owned(value), op, ng)
    }

    fn binary(&self, a: Var, b: Var, op: Op, f: impl FnOnce(&Tensor, &Tensor) -> Tensor) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            f(&nodes[a.0].value, &nodes[b.0].value)
        };
        let ng = self.needs(&[a, b]);
        self.push(Cow::Owned(value), op, ng)
    }

    /// A differentiable leaf borrowing `t`.
    pub fn param(&self, t: &'p Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// A constant leaf borrowing `t`.
    pub fn constant_ref(&self, t: &'p Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, false)
    }

    pub fn constant(&self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    /// An owned differentiable leaf (for inputs whose gradient is wanted).
    pub fn variable(&self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| n[v.0].value.as_ref())
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn matmul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::MatMul(a, b), |a, b| a.matmul(b))
    }

    /// `x * w + b` for a `1 x out` bias.
    pub fn dense(&self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn add_row(&self, x: Var, b: Var) -> Var {
        self.binary(x, b, Op::AddRow(x, b), |x, b| {
            assert_eq!(b.rows(), 1, "bias must be a row vector");
            assert_eq!(x.cols(), b.cols(), "bias width {} for {} columns", b.cols(), x.cols());
            let mut out = x.clone();
            for r in 0..out.rows() {
                for (o, bb) in out.row_mut(r).iter_mut().zip(b.as_slice()) {
                    *o += bb;
                }
            }
            out
        })
    }

    fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(a.shape(), b.shape(), "elementwise op on {:?} and {:?}", a.shape(), b.shape());
        Tensor::from_vec(
            a.rows(),
            a.cols(),
            a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| f(x, y)).collect(),
        )
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |a, b| Self::zip(a, b, |x, y| x + y))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |a, b| Self::zip(a, b, |x, y| x - y))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |a, b| Self::zip(a, b, |x, y| x * y))
    }

    pub fn scale(&self, x: Var, s: f64) -> Var {
        self.unary(x, Op::Scale(x, s), |t| t.map(|v| v * s))
    }

    pub fn relu(&self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |t| t.map(|v| v.max(0.0)))
    }

    pub fn leaky_relu(&self, x: Var, slope: f64) -> Var {
        self.unary(x, Op::LeakyRelu(x, slope), |t| t.map(|v| if v > 0.0 { v } else { slope * v }))
    }

    pub fn sigmoid(&self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), |t| t.map(sigmoid))
    }

    pub fn square(&self, x: Var) -> Var {
        self.unary(x, Op::Square(x), |t| t.map(|v| v * v))
    }

    pub fn sum(&self, x: Var) -> Var {
        self.unary(x, Op::SumAll(x), |t| Tensor::scalar(t.sum()))
    }

    /// Panics on an empty tensor.
    pub fn mean(&self, x: Var) -> Var {
        self.unary(x, Op::MeanAll(x), |t| {
            assert!(!t.is_empty(), "mean of an empty tensor");
            Tensor::scalar(t.sum() / t.len() as f64)
        })
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let rows = nodes[parts[0].0].value.rows();
            let cols: usize = parts.iter().map(|p| nodes[p.0].value.cols()).sum();
            let mut out = Tensor::zeros(rows, cols);
            let mut offset = 0;
            for p in parts {
                let t = &nodes[p.0].value;
                assert_eq!(t.rows(), rows, "concat of tensors with different row counts");
                for r in 0..rows {
                    out.row_mut(r)[offset..offset + t.cols()].copy_from_slice(t.row(r));
                }
                offset += t.cols();
            }
            out
        };
        let ng = self.needs(parts);
        self.push(Cow::Owned(value), Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn gather(&self, x: Var, idx: Index) -> Var {
        let value = {
            let t = self.value(x);
            let mut out = Tensor::zeros(idx.len(), t.cols());
            for (e, &i) in idx.iter().enumerate() {
                out.row_mut(e).copy_from_slice(t.row(i));
            }
            out
        };
        let ng = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::Gather(x, idx), ng)
    }

    /// Sums rows into `n` buckets: `out[idx[e]] += x[e]`.
    pub fn scatter_sum(&self, x: Var, idx: Index, n: usize) -> Var {
        let value = {
            let t = self.value(x);
            assert_eq!(t.rows(), idx.len(), "scatter index length");
            let mut out = Tensor::zeros(n, t.cols());
            for (e, &i) in idx.iter().enumerate() {
                for (o, v) in out.row_mut(i).iter_mut().zip(t.row(e)) {
                    *o += v;
                }
            }
            out
        };
        let ng = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::ScatterSum(x, idx), ng)
    }

    /// Softmax of the `E x 1` scores within each of `n` segments.
    pub fn segment_softmax(&self, scores: Var, seg: Index, n: usize) -> Var {
        let value = segment_softmax(&self.value(scores), &seg, n);
        let ng = self.needs(&[scores]);
        self.push(Cow::Owned(value), Op::SegmentSoftmax(scores, seg, n), ng)
    }

    pub fn row_scale(&self, x: Var, w: Var) -> Var {
        self.binary(x, w, Op::RowScale(x, w), |x, w| {
            assert_eq!(w.shape(), (x.rows(), 1), "row weights must be a column of length {}", x.rows());
            let mut out = x.clone();
            for r in 0..out.rows() {
                let s = w.as_slice()[r];
                out.row_mut(r).iter_mut().for_each(|v| *v *= s);
            }
            out
        })
    }

    /// Mean of the rows of each segment; empty segments give zero rows.
    pub fn segment_mean(&self, x: Var, seg: Index, n: usize) -> Var {
        let mut counts = vec![0usize; n];
        for &s in seg.iter() {
            counts[s] += 1;
        }
        let counts: Rc<[usize]> = counts.into();
        let value = {
            let t = self.value(x);
            assert_eq!(t.rows(), seg.len(), "segment ids must cover every row");
            let mut out = Tensor::zeros(n, t.cols());
            for (r, &s) in seg.iter().enumerate() {
                let inv = 1.0 / counts[s] as f64;
                for (o, v) in out.row_mut(s).iter_mut().zip(t.row(r)) {
                    *o += v * inv;
                }
            }
            out
        };
        let ng = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::SegmentMean(x, seg, counts), ng)
    }

    /// Evaluates only the picked outputs of a dense layer. `w` holds one row
    /// per output column (`M x H`), `b` is `1 x M`, result is `P x 1`.
    pub fn select_dense(&self, h: Var, w: Var, b: Var, picks: Picks) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let (h, w, b) = (&nodes[h.0].value, &nodes[w.0].value, &nodes[b.0].value);
            assert_eq!(h.cols(), w.cols(), "select_dense hidden width");
            assert_eq!(b.shape(), (1, w.rows()), "select_dense bias shape");
            let mut out = Tensor::zeros(picks.len(), 1);
            for (p, &(r, c)) in picks.iter().enumerate() {
                out.as_mut_slice()[p] = dot(h.row(r as usize), w.row(c as usize)) + b.as_slice()[c as usize];
            }
            out
        };
        let ng = self.needs(&[h, w, b]);
        self.push(Cow::Owned(value), Op::SelectDense(h, w, b, picks), ng)
    }

    /// Sparse-by-dense product: row `r_p` of the `rows x C` result gains
    /// `v[p] * w[c_p]`. `v` is `P x 1`; `w` is `K x C`.
    pub fn sparse_dense(&self, v: Var, w: Var, pattern: Picks, rows: usize) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let (v, w) = (&nodes[v.0].value, &nodes[w.0].value);
            assert_eq!(v.shape(), (pattern.len(), 1), "sparse values must be a column per pattern entry");
            let mut out = Tensor::zeros(rows, w.cols());
            for (p, &(r, c)) in pattern.iter().enumerate() {
                axpy(v.as_slice()[p], w.row(c as usize), out.row_mut(r as usize));
            }
            out
        };
        let ng = self.needs(&[v, w]);
        self.push(Cow::Owned(value), Op::SparseDense(v, w, pattern), ng)
    }

    /// Gradients of the `1 x 1` node `loss` with respect to every node that
    /// depends on a differentiable leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients, DiffError> {
        let nodes = self.nodes.borrow();
        let (r, c) = nodes[loss.0].value.shape();
        if (r, c) != (1, 1) {
            return Err(DiffError::NonScalarLoss(r, c));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        if !nodes[loss.0].needs_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let need = |v: &Var| nodes[v.0].needs_grad;
            let val = |v: &Var| nodes[v.0].value.as_ref();
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if need(a) {
                        let (ar, ac) = val(a).shape();
                        accumulate_with(&mut grads[a.0], ar, ac, |t| gemm(G::N, &g, G::T, val(b), t, 1.0));
                    }
                    if need(b) {
                        let (br, bc) = val(b).shape();
                        accumulate_with(&mut grads[b.0], br, bc, |t| gemm(G::T, val(a), G::N, &g, t, 1.0));
                    }
                }
                Op::AddRow(x, b) => {
                    if need(b) {
                        let mut gb = Tensor::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (o, v) in gb.as_mut_slice().iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                        accumulate(&mut grads[b.0], gb);
                    }
                    if need(x) {
                        accumulate(&mut grads[x.0], g);
                    }
                }
                Op::Add(a, b) => {
                    if need(a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if need(b) {
                        accumulate(&mut grads[b.0], g);
                    }
                }
                Op::Sub(a, b) => {
                    if need(a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if need(b) {
                        accumulate(&mut grads[b.0], g.map(|v| -v));
                    }
                }
                Op::Mul(a, b) => {
                    if need(a) {
                        accumulate(&mut grads[a.0], Self::zip(&g, val(b), |x, y| x * y));
                    }
                    if need(b) {
                        accumulate(&mut grads[b.0], Self::zip(&g, val(a), |x, y| x * y));
                    }
                }
                Op::Scale(x, s) => accumulate(&mut grads[x.0], g.map(|v| v * s)),
                Op::Relu(x) => {
                    let out = &node.value;
                    accumulate(&mut grads[x.0], Self::zip(&g, out, |d, y| if y > 0.0 { d } else { 0.0 }));
                }
                Op::LeakyRelu(x, slope) => {
                    let s = *slope;
                    accumulate(&mut grads[x.0], Self::zip(&g, val(x), |d, u| if u > 0.0 { d } else { s * d }));
                }
                Op::Sigmoid(x) => {
                    let out = &node.value;
                    accumulate(&mut grads[x.0], Self::zip(&g, out, |d, y| d * y * (1.0 - y)));
                }
                Op::Square(x) => accumulate(&mut grads[x.0], Self::zip(&g, val(x), |d, u| 2.0 * d * u)),
                Op::SumAll(x) => {
                    let (r, c) = val(x).shape();
                    accumulate(&mut grads[x.0], Tensor::filled(r, c, g.item()));
                }
                Op::MeanAll(x) => {
                    let (r, c) = val(x).shape();
                    accumulate(&mut grads[x.0], Tensor::filled(r, c, g.item() / (r * c) as f64));
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (pr, pc) = val(p).shape();
                        if need(p) {
                            let mut gp = Tensor::zeros(pr, pc);
                            for r in 0..pr {
                                gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + pc]);
                            }
                            accumulate(&mut grads[p.0], gp);
                        }
                        offset += pc;
                    }
                }
                Op::Gather(x, idx) => {
                    let (xr, xc) = val(x).shape();
                    accumulate_with(&mut grads[x.0], xr, xc, |t| {
                        for (e, &s) in idx.iter().enumerate() {
                            for (o, v) in t.row_mut(s).iter_mut().zip(g.row(e)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::ScatterSum(x, idx) => {
                    let (xr, xc) = val(x).shape();
                    accumulate_with(&mut grads[x.0], xr, xc, |t| {
                        for (e, &s) in idx.iter().enumerate() {
                            for (o, v) in t.row_mut(e).iter_mut().zip(g.row(s)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::SegmentSoftmax(x, seg, n) => {
                    let y = node.value.as_slice();
                    let gs = g.as_slice();
                    let mut inner = vec![0.0; *n];
                    for (e, &s) in seg.iter().enumerate() {
                        inner[s] += y[e] * gs[e];
                    }
                    let dx: Vec<f64> = seg.iter().enumerate().map(|(e, &s)| y[e] * (gs[e] - inner[s])).collect();
                    accumulate(&mut grads[x.0], Tensor::column_vector(dx));
                }
                Op::RowScale(x, w) => {
                    let (xv, wv) = (val(x), val(w));
                    if need(x) {
                        let mut gx = g.clone();
                        for r in 0..gx.rows() {
                            let s = wv.as_slice()[r];
                            gx.row_mut(r).iter_mut().for_each(|v| *v *= s);
                        }
                        accumulate(&mut grads[x.0], gx);
                    }
                    if need(w) {
                        let gw: Vec<f64> = (0..g.rows()).map(|r| dot(g.row(r), xv.row(r))).collect();
                        accumulate(&mut grads[w.0], Tensor::column_vector(gw));
                    }
                }
                Op::SegmentMean(x, seg, counts) => {
                    let (xr, xc) = val(x).shape();
                    accumulate_with(&mut grads[x.0], xr, xc, |t| {
                        for (r, &s) in seg.iter().enumerate() {
                            let inv = 1.0 / counts[s] as f64;
                            for (o, v) in t.row_mut(r).iter_mut().zip(g.row(s)) {
                                *o += v * inv;
                            }
                        }
                    });
                }
                Op::SelectDense(h, w, b, picks) => {
                    let gs = g.as_slice();
                    let (hv, wv) = (val(h), val(w));
                    if need(h) {
                        let (hr, hc) = hv.shape();
                        accumulate_with(&mut grads[h.0], hr, hc, |t| {
                            for (p, &(r, c)) in picks.iter().enumerate() {
                                axpy(gs[p], wv.row(c as usize), t.row_mut(r as usize));
                            }
                        });
                    }
                    if need(w) {
                        let (wr, wc) = wv.shape();
                        accumulate_with(&mut grads[w.0], wr, wc, |t| {
                            for (p, &(r, c)) in picks.iter().enumerate() {
                                axpy(gs[p], hv.row(r as usize), t.row_mut(c as usize));
                            }
                        });
                    }
                    if need(b) {
                        let bc = val(b).cols();
                        accumulate_with(&mut grads[b.0], 1, bc, |t| {
                            for (p, &(_, c)) in picks.iter().enumerate() {
                                t.as_mut_slice()[c as usize] += gs[p];
                            }
                        });
                    }
                }
                Op::SparseDense(v, w, pattern) => {
                    let (vv, wv) = (val(v), val(w));
                    if need(v) {
                        let gv: Vec<f64> = pattern
                            .iter()
                            .map(|&(r, c)| dot(g.row(r as usize), wv.row(c as usize)))
                            .collect();
                        accumulate(&mut grads[v.0], Tensor::column_vector(gv));
                    }
                    if need(w) {
                        let (wr, wc) = wv.shape();
                        accumulate_with(&mut grads[w.0], wr, wc, |t| {
                            for (p, &(r, c)) in pattern.iter().enumerate() {
                                axpy(vv.as_slice()[p], g.row(r as usize), t.row_mut(c as usize));
                            }
                        });
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// Softmax of an `E x 1` column within segments `0..n`. An empty input gives
/// an empty output.
pub fn segment_softmax(scores: &Tensor, seg: &[usize], n: usize) -> Tensor {
    assert_eq!(scores.shape(), (seg.len(), 1), "scores must be a column per segment id");
    let s = scores.as_slice();
    let mut max = vec![f64::NEG_INFINITY; n];
    for (e, &g) in seg.iter().enumerate() {
        max[g] = max[g].max(s[e]);
    }
    let mut out: Vec<f64> = seg.iter().enumerate().map(|(e, &g)| (s[e] - max[g]).exp()).collect();
    let mut sum = vec![0.0; n];
    for (e, &g) in seg.iter().enumerate() {
        sum[g] += out[e];
    }
    for (e, &g) in seg.iter().enumerate() {
        out[e] /= sum[g];
    }
    Tensor::column_vector(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_gradient() {
        let w = Tensor::scalar(2.0);
        let tape = Tape::new();
        let wv = tape.param(&w);
        let x = tape.constant(Tensor::scalar(3.0));
        let loss = tape.matmul(x, wv);
        assert_eq!(tape.value(loss).item(), 6.0);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(wv).unwrap().item(), 3.0);
        assert!(g.get(x).is_none());
    }

    #[test]
    fn dead_relu_has_zero_gradient() {
        let w = Tensor::scalar(-1.0);
        let tape = Tape::new();
        let wv = tape.param(&w);
        let x = tape.constant(Tensor::scalar(3.0));
        let y = tape.relu(tape.matmul(x, wv));
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(wv).unwrap().item(), 0.0);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let tape = Tape::new();
        let x = tape.variable(Tensor::zeros(2, 1));
        assert_eq!(tape.backward(x).unwrap_err(), DiffError::NonScalarLoss(2, 1));
    }

    #[test]
    fn leaky_relu_and_softmax_examples() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::scalar(-1.0));
        assert!((tape.value(tape.leaky_relu(x, 0.2)).item() + 0.2).abs() < 1e-15);

        let s = segment_softmax(&Tensor::column_vector(vec![1.0, 1.0]), &[0, 0], 1);
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let s = segment_softmax(&Tensor::column_vector(vec![0.0, 3f64.ln()]), &[0, 0], 1);
        assert!((s.as_slice()[0] - 0.25).abs() < 1e-15 && (s.as_slice()[1] - 0.75).abs() < 1e-15);
        let empty = segment_softmax(&Tensor::zeros(0, 1), &[], 3);
        assert!(empty.is_empty());
    }

    #[test]
    fn scatter_sum_and_segment_mean() {
        let tape = Tape::new();
        let m = tape.constant(Tensor::column_vector(vec![1.0, 2.0]));
        let s = tape.scatter_sum(m, vec![0, 0].into(), 2);
        assert_eq!(tape.value(s).as_slice(), &[3.0, 0.0]);
        let m = tape.constant(Tensor::column_vector(vec![2.0, 4.0, 6.0]));
        let mean = tape.segment_mean(m, vec![0, 0, 0].into(), 1);
        assert_eq!(tape.value(mean).item(), 4.0);
    }

    #[test]
    fn shared_leaf_accumulates() {
        let w = Tensor::scalar(3.0);
        let tape = Tape::new();
        let wv = tape.param(&w);
        let y = tape.mul(wv, wv);
        let z = tape.add(y, wv);
        let g = tape.backward(z).unwrap();
        assert_eq!(g.get(wv).unwrap().item(), 7.0);
    }
}
