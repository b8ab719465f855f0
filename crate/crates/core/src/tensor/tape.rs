use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

use super::{gemm, CsrMatrix, Tensor};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Exp(usize),
    Log(usize),
    Neg(usize),
    Scale(usize, f64),
    Clamp(usize, f64, f64),
    LeakyRelu(usize, f64),
    Prelu(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    RowSoftmax(usize),
    SegmentSoftmax(usize, Rc<[usize]>),
    Spmm(Rc<CsrMatrix>, usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    GatherRows(usize, Rc<[usize]>),
    Sum(usize),
    Mean(usize),
    SumRows(usize),
    L2RowNormalize(usize, f64),
    ScaleRows(usize, usize),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    tracked: bool,
}

/// Ordered record of operations. Every node's inputs precede it, so a single
/// reverse sweep computes all gradients.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?})", self.id, self.value())
    }
}

/// Gradients of a scalar with respect to every tracked node on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when `var` is untracked or does not influence the loss.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    pub fn get_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&var.shape()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a trainable value; gradients are reported for it.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_node(value, Op::Leaf, true)
    }

    /// Records a constant; no gradient flows into it.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_node(value, Op::Leaf, false)
    }

    fn push_node(&self, value: Tensor, op: Op, tracked: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            tracked,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn tracked(&self, id: usize) -> bool {
        self.nodes.borrow()[id].tracked
    }

    fn record(&self, name: &str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::Domain(format!("{name} produced a non-finite value")));
        }
        let tracked = inputs.iter().any(|&i| self.tracked(i));
        let op = if tracked { op } else { Op::Leaf };
        Ok(self.push_node(value, op, tracked))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(Error::contract("loss belongs to a different tape"));
        }
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        if !root.tracked {
            return Ok(Gradients { grads });
        }
        grads[loss.id] = Some(Tensor::full(root.value.shape(), 1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            propagate(&nodes, &mut grads, id, &g);
            // Non-leaf gradients are kept so callers can inspect them.
            grads[id] = Some(g);
        }
        for (id, node) in nodes.iter().enumerate() {
            if !node.tracked {
                grads[id] = None;
            }
        }
        Ok(Gradients { grads })
    }
}

fn accum<'g>(nodes: &[Node], grads: &'g mut [Option<Tensor>], id: usize) -> Option<&'g mut Tensor> {
    if !nodes[id].tracked {
        return None;
    }
    Some(grads[id].get_or_insert_with(|| Tensor::zeros(nodes[id].value.shape())))
}

fn add_scaled(dst: &mut Tensor, src: &[f64], scale: f64) {
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += scale * s;
    }
}

fn propagate(nodes: &[Node], grads: &mut [Option<Tensor>], id: usize, g: &Tensor) {
    let out = &nodes[id].value;
    let val = |i: usize| -> &Tensor { &nodes[i].value };
    let gd = g.data();
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            if let Some(t) = accum(nodes, grads, *a) {
                add_scaled(t, gd, 1.0);
            }
            if let Some(t) = accum(nodes, grads, *b) {
                add_scaled(t, gd, 1.0);
            }
        }
        Op::Sub(a, b) => {
            if let Some(t) = accum(nodes, grads, *a) {
                add_scaled(t, gd, 1.0);
            }
            if let Some(t) = accum(nodes, grads, *b) {
                add_scaled(t, gd, -1.0);
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), bi) in t.data_mut().iter_mut().zip(gd).zip(bv.data()) {
                    *d += gi * bi;
                }
            }
            if let Some(t) = accum(nodes, grads, *b) {
                for ((d, gi), ai) in t.data_mut().iter_mut().zip(gd).zip(av.data()) {
                    *d += gi * ai;
                }
            }
        }
        Op::Div(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), bi) in t.data_mut().iter_mut().zip(gd).zip(bv.data()) {
                    *d += gi / bi;
                }
            }
            if let Some(t) = accum(nodes, grads, *b) {
                for (((d, gi), ai), bi) in t
                    .data_mut()
                    .iter_mut()
                    .zip(gd)
                    .zip(av.data())
                    .zip(bv.data())
                {
                    *d -= gi * ai / (bi * bi);
                }
            }
        }
        Op::Exp(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), yi) in t.data_mut().iter_mut().zip(gd).zip(out.data()) {
                    *d += gi * yi;
                }
            }
        }
        Op::Log(a) => {
            let av = val(*a);
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), xi) in t.data_mut().iter_mut().zip(gd).zip(av.data()) {
                    *d += gi / xi;
                }
            }
        }
        Op::Neg(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                add_scaled(t, gd, -1.0);
            }
        }
        Op::Scale(a, c) => {
            if let Some(t) = accum(nodes, grads, *a) {
                add_scaled(t, gd, *c);
            }
        }
        Op::Clamp(a, lo, hi) => {
            let av = val(*a);
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), xi) in t.data_mut().iter_mut().zip(gd).zip(av.data()) {
                    if *xi >= *lo && *xi <= *hi {
                        *d += gi;
                    }
                }
            }
        }
        Op::LeakyRelu(a, slope) => {
            let av = val(*a);
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), xi) in t.data_mut().iter_mut().zip(gd).zip(av.data()) {
                    *d += if *xi > 0.0 { *gi } else { slope * gi };
                }
            }
        }
        Op::Prelu(a, s) => {
            let av = val(*a);
            let slope = val(*s).data()[0];
            if let Some(t) = accum(nodes, grads, *a) {
                for ((d, gi), xi) in t.data_mut().iter_mut().zip(gd).zip(av.data()) {
                    *d += if *xi > 0.0 { *gi } else { slope * gi };
                }
            }
            if let Some(t) = accum(nodes, grads, *s) {
                let ds: f64 = gd
                    .iter()
                    .zip(av.data())
                    .filter(|(_, x)| **x <= 0.0)
                    .map(|(gi, xi)| gi * xi)
                    .sum();
                t.data_mut()[0] += ds;
            }
        }
        Op::MatMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (m, k) = (av.shape()[0], av.shape()[1]);
            let n = bv.shape()[1];
            if let Some(t) = accum(nodes, grads, *a) {
                // dA = G B^T
                gemm(m, n, k, gd, false, bv.data(), true, t.data_mut(), 1.0);
            }
            if let Some(t) = accum(nodes, grads, *b) {
                // dB = A^T G
                gemm(k, m, n, av.data(), true, gd, false, t.data_mut(), 1.0);
            }
        }
        Op::Transpose(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                let gt = g.transpose().expect("rank-2 gradient");
                add_scaled(t, gt.data(), 1.0);
            }
        }
        Op::Reshape(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                add_scaled(t, gd, 1.0);
            }
        }
        Op::RowSoftmax(a) => {
            let cols = out.shape()[1];
            if let Some(t) = accum(nodes, grads, *a) {
                let td = t.data_mut();
                for r in 0..out.shape()[0] {
                    let span = r * cols..(r + 1) * cols;
                    softmax_backward(&out.data()[span.clone()], &gd[span.clone()], &mut td[span]);
                }
            }
        }
        Op::SegmentSoftmax(a, ptr) => {
            if let Some(t) = accum(nodes, grads, *a) {
                let td = t.data_mut();
                for w in ptr.windows(2) {
                    let span = w[0]..w[1];
                    softmax_backward(&out.data()[span.clone()], &gd[span.clone()], &mut td[span]);
                }
            }
        }
        Op::Spmm(s, b) => {
            if let Some(t) = accum(nodes, grads, *b) {
                let contrib = s.transpose_matmul_dense(g).expect("spmm backward shapes");
                t.add_assign(&contrib);
            }
        }
        Op::ConcatCols(parts) => {
            let rows = out.shape()[0];
            let total = out.shape()[1];
            let mut offset = 0;
            for &p in parts {
                let pc = val(p).shape()[1];
                if let Some(t) = accum(nodes, grads, p) {
                    let td = t.data_mut();
                    for r in 0..rows {
                        let src = &gd[r * total + offset..r * total + offset + pc];
                        for (d, s) in td[r * pc..(r + 1) * pc].iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
                offset += pc;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let n = val(p).numel();
                if let Some(t) = accum(nodes, grads, p) {
                    add_scaled(t, &gd[offset..offset + n], 1.0);
                }
                offset += n;
            }
        }
        Op::GatherRows(a, index) => {
            let cols = out.shape()[1];
            if let Some(t) = accum(nodes, grads, *a) {
                let td = t.data_mut();
                for (r, &src) in index.iter().enumerate() {
                    let from = &gd[r * cols..(r + 1) * cols];
                    for (d, s) in td[src * cols..(src + 1) * cols].iter_mut().zip(from) {
                        *d += s;
                    }
                }
            }
        }
        Op::Sum(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                let g0 = gd[0];
                t.data_mut().iter_mut().for_each(|d| *d += g0);
            }
        }
        Op::Mean(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                let g0 = gd[0] / t.numel() as f64;
                t.data_mut().iter_mut().for_each(|d| *d += g0);
            }
        }
        Op::SumRows(a) => {
            if let Some(t) = accum(nodes, grads, *a) {
                let cols = t.shape()[1];
                for (r, row) in t.data_mut().chunks_mut(cols).enumerate() {
                    row.iter_mut().for_each(|d| *d += gd[r]);
                }
            }
        }
        Op::L2RowNormalize(a, eps) => {
            let av = val(*a);
            let cols = av.shape()[1];
            if let Some(t) = accum(nodes, grads, *a) {
                let td = t.data_mut();
                for r in 0..av.shape()[0] {
                    let span = r * cols..(r + 1) * cols;
                    let x = &av.data()[span.clone()];
                    let y = &out.data()[span.clone()];
                    let gr = &gd[span.clone()];
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let dst = &mut td[span];
                    if norm >= *eps && norm > 0.0 {
                        let yg: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, gi), yi) in dst.iter_mut().zip(gr).zip(y) {
                            *d += (gi - yi * yg) / norm;
                        }
                    } else {
                        for (d, gi) in dst.iter_mut().zip(gr) {
                            *d += gi / eps;
                        }
                    }
                }
            }
        }
        Op::ScaleRows(x, w) => {
            let (xv, wv) = (val(*x), val(*w));
            let cols = xv.shape()[1];
            if let Some(t) = accum(nodes, grads, *x) {
                let td = t.data_mut();
                for (r, &wr) in wv.data().iter().enumerate() {
                    for c in r * cols..(r + 1) * cols {
                        td[c] += gd[c] * wr;
                    }
                }
            }
            if let Some(t) = accum(nodes, grads, *w) {
                let td = t.data_mut();
                for (r, d) in td.iter_mut().enumerate() {
                    let span = r * cols..(r + 1) * cols;
                    *d += gd[span.clone()]
                        .iter()
                        .zip(&xv.data()[span])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
        }
    }
}

fn softmax_backward(y: &[f64], g: &[f64], dst: &mut [f64]) {
    let yg: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((d, yi), gi) in dst.iter_mut().zip(y).zip(g) {
        *d += yi * (gi - yg);
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn is_tracked(&self) -> bool {
        self.tape.tracked(self.id)
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn same_tape(&self, other: &Var<'t>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(Error::contract("operands belong to different tapes"))
        }
    }

    fn zip_with(
        self,
        rhs: Var<'t>,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        self.same_tape(&rhs)?;
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return Err(Error::dim(format!(
                "{name}: shapes {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor::new(a.shape().to_vec(), data)?;
        self.tape.record(name, value, op, &[self.id, rhs.id])
    }

    fn unary(self, name: &str, value: Tensor, op: Op) -> Result<Var<'t>> {
        self.tape.record(name, value, op, &[self.id])
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.zip_with(rhs, "add", |a, b| a + b, Op::Add(self.id, rhs.id))
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.zip_with(rhs, "sub", |a, b| a - b, Op::Sub(self.id, rhs.id))
    }

    /// Elementwise product.
    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.zip_with(rhs, "mul", |a, b| a * b, Op::Mul(self.id, rhs.id))
    }

    /// Elementwise quotient.
    pub fn div(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.zip_with(rhs, "div", |a, b| a / b, Op::Div(self.id, rhs.id))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        let v = self.value().map(f64::exp);
        self.unary("exp", v, Op::Exp(self.id))
    }

    pub fn log(self) -> Result<Var<'t>> {
        let x = self.value();
        if let Some(bad) = x.data().iter().find(|v| **v <= 0.0) {
            return Err(Error::Domain(format!("log of non-positive entry {bad}")));
        }
        self.unary("log", x.map(f64::ln), Op::Log(self.id))
    }

    pub fn neg(self) -> Result<Var<'t>> {
        let v = self.value().map(|x| -x);
        self.unary("neg", v, Op::Neg(self.id))
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        let v = self.value().map(|x| c * x);
        self.unary("scale", v, Op::Scale(self.id, c))
    }

    /// Clamps into `[lo, hi]`; gradient is zero outside the interval.
    pub fn clamp(self, lo: f64, hi: f64) -> Result<Var<'t>> {
        if lo > hi {
            return Err(Error::contract(format!("clamp bounds {lo} > {hi}")));
        }
        let v = self.value().map(|x| x.clamp(lo, hi));
        self.unary("clamp", v, Op::Clamp(self.id, lo, hi))
    }

    pub fn leaky_relu(self, slope: f64) -> Result<Var<'t>> {
        let v = self.value().map(|x| if x > 0.0 { x } else { slope * x });
        self.unary("leaky_relu", v, Op::LeakyRelu(self.id, slope))
    }

    /// Leaky ReLU whose negative slope is the (trainable) one-element `slope`.
    pub fn prelu(self, slope: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&slope)?;
        let s = slope.value();
        if s.numel() != 1 {
            return Err(Error::dim(format!(
                "prelu slope must be a scalar, got {:?}",
                s.shape()
            )));
        }
        let s = s.data()[0];
        let v = self.value().map(|x| if x > 0.0 { x } else { s * x });
        self.tape.record(
            "prelu",
            v,
            Op::Prelu(self.id, slope.id),
            &[self.id, slope.id],
        )
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&rhs)?;
        let v = self.value().matmul(&rhs.value())?;
        self.tape
            .record("matmul", v, Op::MatMul(self.id, rhs.id), &[self.id, rhs.id])
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let v = self.value().transpose()?;
        self.unary("transpose", v, Op::Transpose(self.id))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let v = self.value().reshape(shape)?;
        self.unary("reshape", v, Op::Reshape(self.id))
    }

    pub fn row_softmax(self) -> Result<Var<'t>> {
        let x = self.value();
        let (_, cols) = x.dims2("row_softmax")?;
        let mut v = (*x).clone();
        if cols > 0 {
            v.data_mut().chunks_mut(cols).for_each(softmax_in_place);
        }
        self.unary("row_softmax", v, Op::RowSoftmax(self.id))
    }

    /// Softmax over contiguous segments of a column vector; segment `s`
    /// spans rows `ptr[s]..ptr[s + 1]`.
    pub fn segment_softmax(self, ptr: Rc<[usize]>) -> Result<Var<'t>> {
        let x = self.value();
        let (n, cols) = x.dims2("segment_softmax")?;
        if cols != 1 || ptr.first() != Some(&0) || ptr.last() != Some(&n) {
            return Err(Error::dim(format!(
                "segment_softmax over {:?} with segments ending at {:?}",
                x.shape(),
                ptr.last()
            )));
        }
        if ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::contract("segment pointers must be non-decreasing"));
        }
        let mut v = (*x).clone();
        for w in ptr.windows(2) {
            if w[1] > w[0] {
                softmax_in_place(&mut v.data_mut()[w[0]..w[1]]);
            }
        }
        self.unary("segment_softmax", v, Op::SegmentSoftmax(self.id, ptr))
    }

    /// `sparse * self` with a constant sparse left operand.
    pub fn spmm(self, sparse: Rc<CsrMatrix>) -> Result<Var<'t>> {
        let v = sparse.matmul_dense(&self.value())?;
        self.unary("spmm", v, Op::Spmm(sparse, self.id))
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_cols of nothing"))?;
        let values: Vec<_> = parts.iter().map(Var::value).collect();
        let rows = values[0].dims2("concat_cols")?.0;
        let mut total = 0;
        for (p, v) in parts.iter().zip(&values) {
            first.same_tape(p)?;
            let (r, c) = v.dims2("concat_cols")?;
            if r != rows {
                return Err(Error::dim(format!(
                    "concat_cols row mismatch {r} vs {rows}"
                )));
            }
            total += c;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &values {
                data.extend_from_slice(v.row(r));
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        first.tape.record(
            "concat_cols",
            Tensor::matrix(rows, total, data)?,
            Op::ConcatCols(ids.clone()),
            &ids,
        )
    }

    /// Stacks rank-2 parts with equal column counts on top of each other.
    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_rows of nothing"))?;
        let values: Vec<_> = parts.iter().map(Var::value).collect();
        let cols = values[0].dims2("concat_rows")?.1;
        let mut rows = 0;
        let mut data = Vec::new();
        for (p, v) in parts.iter().zip(&values) {
            first.same_tape(p)?;
            let (r, c) = v.dims2("concat_rows")?;
            if c != cols {
                return Err(Error::dim(format!(
                    "concat_rows column mismatch {c} vs {cols}"
                )));
            }
            rows += r;
            data.extend_from_slice(v.data());
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        first.tape.record(
            "concat_rows",
            Tensor::matrix(rows, cols, data)?,
            Op::ConcatRows(ids.clone()),
            &ids,
        )
    }

    pub fn gather_rows(self, index: Rc<[usize]>) -> Result<Var<'t>> {
        let v = self.value().gather_rows(&index)?;
        self.unary("gather_rows", v, Op::GatherRows(self.id, index))
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(self) -> Result<Var<'t>> {
        let v = Tensor::scalar(self.value().sum());
        self.unary("sum", v, Op::Sum(self.id))
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let x = self.value();
        if x.numel() == 0 {
            return Err(Error::Domain("mean of an empty tensor".into()));
        }
        let v = Tensor::scalar(x.sum() / x.numel() as f64);
        self.unary("mean", v, Op::Mean(self.id))
    }

    /// Per-row sums of a rank-2 tensor, as an `n x 1` column.
    pub fn sum_rows(self) -> Result<Var<'t>> {
        let x = self.value();
        let (_, cols) = x.dims2("sum_rows")?;
        let sums = if cols == 0 {
            vec![0.0; x.rows()]
        } else {
            x.data().chunks(cols).map(|r| r.iter().sum()).collect()
        };
        self.unary("sum_rows", Tensor::column(sums), Op::SumRows(self.id))
    }

    /// Divides each row by `max(norm, eps)`. With `eps == 0` a zero row is a
    /// domain error.
    pub fn l2_row_normalize(self, eps: f64) -> Result<Var<'t>> {
        let x = self.value();
        let (_, cols) = x.dims2("l2_row_normalize")?;
        let mut v = (*x).clone();
        for (r, row) in v.data_mut().chunks_mut(cols.max(1)).enumerate() {
            let norm = row.iter().map(|a| a * a).sum::<f64>().sqrt();
            let denom = norm.max(eps);
            if denom <= 0.0 {
                return Err(Error::Domain(format!(
                    "l2_row_normalize: row {r} has zero norm"
                )));
            }
            row.iter_mut().for_each(|a| *a /= denom);
        }
        self.unary("l2_row_normalize", v, Op::L2RowNormalize(self.id, eps))
    }

    /// Multiplies row `i` of `self` by `weights[i]` (an `n x 1` column).
    pub fn scale_rows(self, weights: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&weights)?;
        let (x, w) = (self.value(), weights.value());
        let (rows, cols) = x.dims2("scale_rows")?;
        if w.shape() != [rows, 1] {
            return Err(Error::dim(format!(
                "scale_rows weights {:?} for {:?}",
                w.shape(),
                x.shape()
            )));
        }
        let mut v = (*x).clone();
        if cols > 0 {
            for (row, wr) in v.data_mut().chunks_mut(cols).zip(w.data()) {
                row.iter_mut().for_each(|a| *a *= wr);
            }
        }
        self.tape.record(
            "scale_rows",
            v,
            Op::ScaleRows(self.id, weights.id),
            &[self.id, weights.id],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let i = tape.constant(Tensor::identity(2));
        assert_eq!(*a.matmul(i).unwrap().value(), *a.value());

        let z = tape.constant(Tensor::zeros(&[1, 3]));
        let s = z.row_softmax().unwrap().value();
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let x = tape.constant(Tensor::matrix(1, 2, vec![-1.0, 2.0]).unwrap());
        assert_eq!(x.leaky_relu(0.2).unwrap().value().data(), &[-0.2, 2.0]);
    }

    #[test]
    fn errors_are_reported() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 3]));
        let b = tape.leaf(Tensor::zeros(&[2, 3]));
        assert!(matches!(a.matmul(b), Err(Error::Dimension(_))));
        assert!(matches!(a.log(), Err(Error::Domain(_))));
        assert!(matches!(a.l2_row_normalize(0.0), Err(Error::Domain(_))));
        assert!(matches!(tape.backward(a), Err(Error::Contract(_))));
        let big = tape.leaf(Tensor::scalar(800.0));
        assert!(matches!(big.exp(), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_rows_with_eps_stay_zero() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap());
        let n = a.l2_row_normalize(1e-12).unwrap().value();
        assert_eq!(n.data(), &[0.0, 0.0, 0.6, 0.8]);
    }

    #[test]
    fn untracked_inputs_are_not_recorded() {
        let tape = Tape::new();
        let c = tape.constant(Tensor::scalar(2.0));
        let y = c.exp().unwrap();
        assert!(!y.is_tracked());
        let g = tape.backward(y).unwrap();
        assert!(g.get(c).is_none());
    }
}
