//! Define-by-run gradient tape.
//!
//! A [`Graph`] is an arena of nodes appended in evaluation order, so the
//! reverse of insertion order is a topological order of the computation.
//! Ops are methods on the graph and return [`Var`] handles; a fresh graph
//! is built for every forward pass.

use super::scalar::{gemm, MatView};
use super::tensor::numel;
use super::{Scalar, Tensor, TensorError};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<E> {
    Leaf,
    Const,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Affine(Var, E),
    MatMul(Var, Var),
    Bmm { a: Var, b: Var, trans_b: bool },
    Permute { x: Var, perm: Vec<usize> },
    Reshape(Var),
    CausalConv { x: Var, w: Var },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Ln(Var),
    Clamp { x: Var, lo: E, hi: E },
    Softmax(Var),
    MeanAxis { x: Var, axis: usize },
    SumAll(Var),
    MeanAll(Var),
    Concat { xs: Vec<Var>, axis: usize },
    Slice { x: Var, axis: usize, start: usize },
    Gather { x: Var, idx: Vec<usize> },
}

#[derive(Debug)]
struct Node<E> {
    shape: Vec<usize>,
    value: Vec<E>,
    requires_grad: bool,
    op: Op<E>,
}

/// Gradient tape.
#[derive(Debug)]
pub struct Graph<E> {
    nodes: Vec<Node<E>>,
    record: bool,
}

impl<E: Scalar> Default for Graph<E> {
    fn default() -> Self {
        Self::new()
    }
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<E> {
    grads: Vec<Option<Vec<E>>>,
    sizes: Vec<usize>,
    visited: usize,
}

impl<E: Scalar> Gradients<E> {
    /// Gradient of the loss w.r.t. a leaf; zeros when the leaf is unreachable.
    pub fn wrt(&self, v: Var) -> Vec<E> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => vec![E::zero(); self.sizes[v.0]],
        }
    }

    pub fn get(&self, v: Var) -> Option<&[E]> {
        self.grads[v.0].as_deref()
    }

    /// Number of nodes processed by the backward sweep.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

/// `(outer, axis_len, inner)` decomposition of `shape` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn permute_data<E: Copy>(data: &[E], shape: &[usize], perm: &[usize]) -> Vec<E> {
    let rank = shape.len();
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    // trailing axes left in place are copied as contiguous blocks
    let mut k = rank;
    while k > 0 && perm[k - 1] == k - 1 {
        k -= 1;
    }
    let block: usize = shape[k..].iter().product();
    let outer_dims: Vec<usize> = perm[..k].iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm[..k].iter().map(|&p| in_strides[p]).collect();
    let count: usize = outer_dims.iter().product();
    let mut out = Vec::with_capacity(data.len());
    if block == 0 {
        return out;
    }
    let mut idx = vec![0usize; k];
    let mut offset = 0usize;
    for _ in 0..count {
        out.extend_from_slice(&data[offset..offset + block]);
        let mut d = k;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            offset += src_strides[d];
            if idx[d] < outer_dims[d] {
                break;
            }
            offset -= src_strides[d] * outer_dims[d];
            idx[d] = 0;
        }
    }
    out
}

fn im2col<E: Scalar>(x: &[E], b: usize, t: usize, cin: usize, k: usize) -> Vec<E> {
    let width = k * cin;
    let mut cols = vec![E::zero(); b * t * width];
    for bi in 0..b {
        for ti in 0..t {
            let row = &mut cols[(bi * t + ti) * width..(bi * t + ti + 1) * width];
            for j in 0..k {
                // tap j reads x[t - (k - 1) + j]; earlier positions are zero padding
                let src = ti + j;
                if src < k - 1 {
                    continue;
                }
                let st = src - (k - 1);
                row[j * cin..(j + 1) * cin].copy_from_slice(&x[(bi * t + st) * cin..(bi * t + st + 1) * cin]);
            }
        }
    }
    cols
}

fn accumulate<E: Scalar>(slot: &mut Option<Vec<E>>, contrib: Vec<E>) {
    match slot {
        Some(g) => g.iter_mut().zip(contrib).for_each(|(a, b)| *a += b),
        None => *slot = Some(contrib),
    }
}

impl<E: Scalar> Graph<E> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), record: true }
    }

    /// A graph that never records backward information; every node is a constant.
    pub fn no_grad() -> Self {
        Graph { nodes: Vec::new(), record: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<E>, op: Op<E>, parents: &[Var]) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let requires_grad = self.record && parents.iter().any(|p| self.nodes[p.0].requires_grad);
        let op = if requires_grad { op } else { Op::Const };
        self.nodes.push(Node { shape, value, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<E> {
        &self.nodes[v.0]
    }

    /// Registers a tensor as a leaf; it participates in backward iff it requires grad.
    pub fn leaf(&mut self, t: &Tensor<E>) -> Var {
        let requires_grad = self.record && t.requires_grad();
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            requires_grad,
            op: if requires_grad { Op::Leaf } else { Op::Const },
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, shape: Vec<usize>, value: Vec<E>) -> Var {
        assert_eq!(numel(&shape), value.len(), "constant shape/data");
        self.nodes.push(Node { shape, value, requires_grad: false, op: Op::Const });
        Var(self.nodes.len() - 1)
    }

    /// A constant copy of `v` that stops gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let n = self.node(v);
        let (shape, value) = (n.shape.clone(), n.value.clone());
        self.constant(shape, value)
    }

    pub fn value(&self, v: Var) -> &[E] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    /// Value of a single-element node.
    pub fn item(&self, v: Var) -> E {
        self.node(v).value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<E> {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node invariant")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch { op, lhs: self.shape(a).to_vec(), rhs: self.shape(b).to_vec() });
        }
        Ok(())
    }

    fn zip_map(&mut self, a: Var, b: Var, f: impl Fn(E, E) -> E, op: Op<E>) -> Var {
        let value = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, op, &[a, b])
    }

    fn unary(&mut self, x: Var, f: impl Fn(E) -> E, op: Op<E>) -> Var {
        let value = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, value, op, &[x])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_map(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_map(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_map(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// `x[..., n] + bias[n]`, broadcasting the bias over leading axes.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let xs = self.shape(x);
        let bs = self.shape(bias);
        if bs.len() != 1 || xs.last() != Some(&bs[0]) {
            return Err(TensorError::ShapeMismatch { op: "add_bias", lhs: xs.to_vec(), rhs: bs.to_vec() });
        }
        let n = bs[0];
        let b = self.value(bias);
        let mut value = self.value(x).to_vec();
        for row in value.chunks_exact_mut(n) {
            row.iter_mut().zip(b).for_each(|(v, &bb)| *v += bb);
        }
        let shape = xs.to_vec();
        Ok(self.push(shape, value, Op::AddBias(x, bias), &[x, bias]))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: E, shift: E) -> Var {
        self.unary(x, |v| scale * v + shift, Op::Affine(x, scale))
    }

    pub fn scale(&mut self, x: Var, scale: E) -> Var {
        self.affine(x, scale, E::zero())
    }

    /// `a[..., k] @ b[k, n] -> [..., n]`; leading axes of `a` are flattened into rows.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (asd, bsd) = (self.shape(a), self.shape(b));
        if asd.is_empty() || bsd.len() != 2 || asd[asd.len() - 1] != bsd[0] {
            return Err(TensorError::ShapeMismatch { op: "matmul", lhs: asd.to_vec(), rhs: bsd.to_vec() });
        }
        let (k, n) = (bsd[0], bsd[1]);
        let m = numel(asd) / k.max(1);
        let mut shape = asd[..asd.len() - 1].to_vec();
        shape.push(n);
        let mut out = vec![E::zero(); m * n];
        gemm(self.value(a), MatView::row_major(m, k), self.value(b), MatView::row_major(k, n), E::zero(), &mut out, MatView::row_major(m, n));
        Ok(self.push(shape, out, Op::MatMul(a, b), &[a, b]))
    }

    /// Batched product `a[bt, m, k] @ b[bt, k, n]`, or `a @ b^T` with `b[bt, n, k]` when `trans_b`.
    pub fn bmm(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var, TensorError> {
        let (asd, bsd) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let bad = || TensorError::ShapeMismatch { op: "bmm", lhs: asd.clone(), rhs: bsd.clone() };
        if asd.len() != 3 || bsd.len() != 3 || asd[0] != bsd[0] {
            return Err(bad());
        }
        let (bt, m, k) = (asd[0], asd[1], asd[2]);
        let (kb, n) = if trans_b { (bsd[2], bsd[1]) } else { (bsd[1], bsd[2]) };
        if kb != k {
            return Err(bad());
        }
        let mut out = vec![E::zero(); bt * m * n];
        let (av, bv) = (self.value(a), self.value(b));
        let bview = if trans_b { MatView::row_major(n, k).t() } else { MatView::row_major(k, n) };
        for i in 0..bt {
            gemm(
                &av[i * m * k..(i + 1) * m * k],
                MatView::row_major(m, k),
                &bv[i * k * n..(i + 1) * k * n],
                bview,
                E::zero(),
                &mut out[i * m * n..(i + 1) * m * n],
                MatView::row_major(m, n),
            );
        }
        Ok(self.push(vec![bt, m, n], out, Op::Bmm { a, b, trans_b }, &[a, b]))
    }

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        let valid = perm.len() == shape.len() && perm.iter().all(|&p| p < shape.len() && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(TensorError::ShapeMismatch { op: "permute", lhs: shape, rhs: perm.to_vec() });
        }
        let value = permute_data(self.value(x), &shape, perm);
        let out_shape = perm.iter().map(|&p| shape[p]).collect();
        Ok(self.push(out_shape, value, Op::Permute { x, perm: perm.to_vec() }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        if numel(shape) != numel(self.shape(x)) {
            return Err(TensorError::ShapeMismatch { op: "reshape", lhs: self.shape(x).to_vec(), rhs: shape.to_vec() });
        }
        let value = self.value(x).to_vec();
        Ok(self.push(shape.to_vec(), value, Op::Reshape(x), &[x]))
    }

    /// Causal 1-D convolution over the time axis.
    ///
    /// `x[b, t, cin]`, `w[k, cin, cout]` -> `[b, t, cout]`, with `k - 1` zeros
    /// of left padding so the output at `t` sees inputs `t - k + 1 ..= t`.
    pub fn causal_conv1d(&mut self, x: Var, w: Var) -> Result<Var, TensorError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || xs[2] != ws[1] || ws[0] == 0 {
            return Err(TensorError::ShapeMismatch { op: "causal_conv1d", lhs: xs, rhs: ws });
        }
        let (b, t, cin) = (xs[0], xs[1], xs[2]);
        let (k, cout) = (ws[0], ws[2]);
        let cols = im2col(self.value(x), b, t, cin, k);
        let mut out = vec![E::zero(); b * t * cout];
        gemm(&cols, MatView::row_major(b * t, k * cin), self.value(w), MatView::row_major(k * cin, cout), E::zero(), &mut out, MatView::row_major(b * t, cout));
        Ok(self.push(vec![b, t, cout], out, Op::CausalConv { x, w }, &[x, w]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, |v| E::one() / (E::one() + (-v).exp()), Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.tanh(), Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > E::zero() { v } else { E::zero() }, Op::Relu(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.ln(), Op::Ln(x))
    }

    /// Clamps into `[lo, hi]`; gradient passes only where the input lies inside.
    pub fn clamp(&mut self, x: Var, lo: E, hi: E) -> Var {
        self.unary(x, |v| v.max(lo).min(hi), Op::Clamp { x, lo, hi })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().ok_or(TensorError::Rank { op: "softmax", shape: shape.clone() })?;
        let mut value = self.value(x).to_vec();
        if n > 0 {
            for row in value.chunks_mut(n) {
                let max = row.iter().fold(E::neg_infinity(), |m, &v| m.max(v));
                let mut sum = E::zero();
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                row.iter_mut().for_each(|v| *v = *v / sum);
            }
        }
        Ok(self.push(shape, value, Op::Softmax(x), &[x]))
    }

    /// Mean over one axis; the axis is removed from the shape.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(TensorError::Axis { op: "mean_axis", axis, shape });
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value(x);
        let mut out = vec![E::zero(); outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let base = (o * len + a) * inner;
                let dst = &mut out[o * inner..(o + 1) * inner];
                dst.iter_mut().zip(&src[base..base + inner]).for_each(|(d, &s)| *d += s);
            }
        }
        let denom = E::from_usize(len).expect("axis length");
        out.iter_mut().for_each(|v| *v = *v / denom);
        let mut out_shape = shape;
        out_shape.remove(axis);
        Ok(self.push(out_shape, out, Op::MeanAxis { x, axis }, &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().copied().sum();
        self.push(vec![], vec![s], Op::SumAll(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s: E = v.iter().copied().sum::<E>() / E::from_usize(v.len().max(1)).expect("len");
        self.push(vec![], vec![s], Op::MeanAll(x), &[x])
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = self.shape(*xs.first().ok_or(TensorError::Empty("concat"))?).to_vec();
        if axis >= first.len() {
            return Err(TensorError::Axis { op: "concat", axis, shape: first });
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let ok = s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::ShapeMismatch { op: "concat", lhs: first, rhs: s.to_vec() });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let len = self.shape(v)[axis];
                out.extend_from_slice(&self.value(v)[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        Ok(self.push(shape, out, Op::Concat { xs: xs.to_vec(), axis }, xs))
    }

    /// `len` consecutive entries of `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(TensorError::Axis { op: "slice", axis, shape });
        }
        let (outer, alen, inner) = split_axis(&shape, axis);
        let src = self.value(x);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * alen + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        Ok(self.push(out_shape, out, Op::Slice { x, axis, start }, &[x]))
    }

    /// Rows of the leading axis selected by `idx` (repeats allowed).
    pub fn gather(&mut self, x: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        let lead = *shape.first().ok_or(TensorError::Rank { op: "gather", shape: shape.clone() })?;
        let row = numel(&shape).checked_div(lead).unwrap_or(0);
        let src = self.value(x);
        let mut out = Vec::with_capacity(idx.len() * row);
        for &i in idx {
            if i >= lead {
                return Err(TensorError::Index { op: "gather", index: i, bound: lead });
            }
            out.extend_from_slice(&src[i * row..(i + 1) * row]);
        }
        let mut out_shape = shape;
        out_shape[0] = idx.len();
        Ok(self.push(out_shape, out, Op::Gather { x, idx: idx.to_vec() }, &[x]))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients<E>, TensorError> {
        let ln = self.node(loss);
        if ln.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(ln.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<E>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut visited = 0;
        if ln.requires_grad {
            grads[loss.0] = Some(vec![E::one()]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            visited += 1;
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            } else {
                self.propagate(i, &g, &mut grads);
            }
        }
        let sizes = self.nodes.iter().map(|n| n.value.len()).collect();
        Ok(Gradients { grads, sizes, visited })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &[E], grads: &mut [Option<Vec<E>>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        match &node.op {
            Op::Leaf | Op::Const => {}
            Op::Add(a, b) => {
                for &p in [a, b] {
                    if self.wants(p) {
                        accumulate(&mut grads[p.0], g.to_vec());
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.to_vec());
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], g.iter().map(|&v| -v).collect());
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let c = g.iter().zip(self.value(*b)).map(|(&gv, &bv)| gv * bv).collect();
                    accumulate(&mut grads[a.0], c);
                }
                if self.wants(*b) {
                    let c = g.iter().zip(self.value(*a)).map(|(&gv, &av)| gv * av).collect();
                    accumulate(&mut grads[b.0], c);
                }
            }
            Op::AddBias(x, bias) => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], g.to_vec());
                }
                if self.wants(*bias) {
                    let n = self.value(*bias).len();
                    let mut c = vec![E::zero(); n];
                    for row in g.chunks(n) {
                        c.iter_mut().zip(row).for_each(|(d, &s)| *d += s);
                    }
                    accumulate(&mut grads[bias.0], c);
                }
            }
            Op::Affine(x, scale) => {
                let c = g.iter().map(|&v| v * *scale).collect();
                accumulate(&mut grads[x.0], c);
            }
            Op::MatMul(a, b) => {
                let bs = self.shape(*b);
                let (k, n) = (bs[0], bs[1]);
                let m = self.value(*a).len() / k.max(1);
                if self.wants(*a) {
                    let mut c = vec![E::zero(); m * k];
                    gemm(g, MatView::row_major(m, n), self.value(*b), MatView::row_major(k, n).t(), E::zero(), &mut c, MatView::row_major(m, k));
                    accumulate(&mut grads[a.0], c);
                }
                if self.wants(*b) {
                    let mut c = vec![E::zero(); k * n];
                    gemm(self.value(*a), MatView::row_major(m, k).t(), g, MatView::row_major(m, n), E::zero(), &mut c, MatView::row_major(k, n));
                    accumulate(&mut grads[b.0], c);
                }
            }
            Op::Bmm { a, b, trans_b } => {
                let asd = self.shape(*a);
                let (bt, m, k) = (asd[0], asd[1], asd[2]);
                let n = node.shape[2];
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    // dA = dC @ B^T   (or dC @ B when B is stored transposed)
                    let bview = if *trans_b { MatView::row_major(n, k) } else { MatView::row_major(k, n).t() };
                    let mut c = vec![E::zero(); bt * m * k];
                    for t in 0..bt {
                        gemm(
                            &g[t * m * n..(t + 1) * m * n],
                            MatView::row_major(m, n),
                            &bv[t * k * n..(t + 1) * k * n],
                            bview,
                            E::zero(),
                            &mut c[t * m * k..(t + 1) * m * k],
                            MatView::row_major(m, k),
                        );
                    }
                    accumulate(&mut grads[a.0], c);
                }
                if self.wants(*b) {
                    let mut c = vec![E::zero(); bt * k * n];
                    for t in 0..bt {
                        let ga = &g[t * m * n..(t + 1) * m * n];
                        let aa = &av[t * m * k..(t + 1) * m * k];
                        let dst = &mut c[t * k * n..(t + 1) * k * n];
                        if *trans_b {
                            // dB[n, k] = dC^T @ A
                            gemm(ga, MatView::row_major(m, n).t(), aa, MatView::row_major(m, k), E::zero(), dst, MatView::row_major(n, k));
                        } else {
                            // dB[k, n] = A^T @ dC
                            gemm(aa, MatView::row_major(m, k).t(), ga, MatView::row_major(m, n), E::zero(), dst, MatView::row_major(k, n));
                        }
                    }
                    accumulate(&mut grads[b.0], c);
                }
            }
            Op::Permute { x, perm } => {
                let mut inv = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inv[p] = i;
                }
                accumulate(&mut grads[x.0], permute_data(g, &node.shape, &inv));
            }
            Op::Reshape(x) => accumulate(&mut grads[x.0], g.to_vec()),
            Op::CausalConv { x, w } => {
                let xs = self.shape(*x);
                let (b, t, cin) = (xs[0], xs[1], xs[2]);
                let ws = self.shape(*w);
                let (k, cout) = (ws[0], ws[2]);
                let width = k * cin;
                if self.wants(*w) {
                    let cols = im2col(self.value(*x), b, t, cin, k);
                    let mut c = vec![E::zero(); width * cout];
                    gemm(&cols, MatView::row_major(b * t, width).t(), g, MatView::row_major(b * t, cout), E::zero(), &mut c, MatView::row_major(width, cout));
                    accumulate(&mut grads[w.0], c);
                }
                if self.wants(*x) {
                    let mut dcols = vec![E::zero(); b * t * width];
                    gemm(g, MatView::row_major(b * t, cout), self.value(*w), MatView::row_major(width, cout).t(), E::zero(), &mut dcols, MatView::row_major(b * t, width));
                    let mut dx = vec![E::zero(); b * t * cin];
                    for bi in 0..b {
                        for ti in 0..t {
                            let row = &dcols[(bi * t + ti) * width..(bi * t + ti + 1) * width];
                            for j in 0..k {
                                let src = ti + j;
                                if src < k - 1 {
                                    continue;
                                }
                                let st = src - (k - 1);
                                let dst = &mut dx[(bi * t + st) * cin..(bi * t + st + 1) * cin];
                                dst.iter_mut().zip(&row[j * cin..(j + 1) * cin]).for_each(|(d, &s)| *d += s);
                            }
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
            }
            Op::Sigmoid(x) => {
                let c = g.iter().zip(y).map(|(&gv, &yv)| gv * yv * (E::one() - yv)).collect();
                accumulate(&mut grads[x.0], c);
            }
            Op::Tanh(x) => {
                let c = g.iter().zip(y).map(|(&gv, &yv)| gv * (E::one() - yv * yv)).collect();
                accumulate(&mut grads[x.0], c);
            }
            Op::Relu(x) => {
                let c = g.iter().zip(self.value(*x)).map(|(&gv, &xv)| if xv > E::zero() { gv } else { E::zero() }).collect();
                accumulate(&mut grads[x.0], c);
            }
            Op::Ln(x) => {
                let c = g.iter().zip(self.value(*x)).map(|(&gv, &xv)| gv / xv).collect();
                accumulate(&mut grads[x.0], c);
            }
            Op::Clamp { x, lo, hi } => {
                let c = g.iter().zip(self.value(*x)).map(|(&gv, &xv)| if xv >= *lo && xv <= *hi { gv } else { E::zero() }).collect();
                accumulate(&mut grads[x.0], c);
            }
            Op::Softmax(x) => {
                let n = *node.shape.last().expect("rank >= 1");
                let mut c = vec![E::zero(); y.len()];
                if n > 0 {
                    for ((dst, yr), gr) in c.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let dot: E = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        dst.iter_mut().zip(yr.iter().zip(gr)).for_each(|(d, (&yv, &gv))| *d = yv * (gv - dot));
                    }
                }
                accumulate(&mut grads[x.0], c);
            }
            Op::MeanAxis { x, axis } => {
                let xs = self.shape(*x);
                let (outer, len, inner) = split_axis(xs, *axis);
                let inv = E::one() / E::from_usize(len).expect("len");
                let mut c = vec![E::zero(); outer * len * inner];
                for o in 0..outer {
                    for a in 0..len {
                        let base = (o * len + a) * inner;
                        c[base..base + inner].iter_mut().zip(&g[o * inner..(o + 1) * inner]).for_each(|(d, &s)| *d = s * inv);
                    }
                }
                accumulate(&mut grads[x.0], c);
            }
            Op::SumAll(x) => {
                let n = self.value(*x).len();
                accumulate(&mut grads[x.0], vec![g[0]; n]);
            }
            Op::MeanAll(x) => {
                let n = self.value(*x).len();
                let v = g[0] / E::from_usize(n.max(1)).expect("len");
                accumulate(&mut grads[x.0], vec![v; n]);
            }
            Op::Concat { xs, axis } => {
                let (outer, total, inner) = split_axis(&node.shape, *axis);
                let mut offset = 0;
                for &v in xs {
                    let len = self.shape(v)[*axis];
                    if self.wants(v) {
                        let mut c = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            c.extend_from_slice(&g[base..base + len * inner]);
                        }
                        accumulate(&mut grads[v.0], c);
                    }
                    offset += len;
                }
            }
            Op::Slice { x, axis, start } => {
                let xs = self.shape(*x);
                let (outer, alen, inner) = split_axis(xs, *axis);
                let len = node.shape[*axis];
                let mut c = vec![E::zero(); outer * alen * inner];
                for o in 0..outer {
                    let base = (o * alen + start) * inner;
                    c[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                accumulate(&mut grads[x.0], c);
            }
            Op::Gather { x, idx } => {
                let n = self.value(*x).len();
                let lead = self.shape(*x)[0];
                let row = n / lead.max(1);
                let mut c = vec![E::zero(); n];
                for (r, &i) in idx.iter().enumerate() {
                    c[i * row..(i + 1) * row].iter_mut().zip(&g[r * row..(r + 1) * row]).for_each(|(d, &s)| *d += s);
                }
                accumulate(&mut grads[x.0], c);
            }
        }
    }
}
