use std::borrow::Cow;

use super::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The generic operation set accepted by [`Graph::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    MatMul,
    Add,
    Mul,
    Concat,
    Slice { start: usize, len: usize },
    Sigmoid,
    Tanh,
    Softmax,
    Mean,
    Max,
    Sum,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    Slice { x: Var, start: usize },
    Gather { table: Var, ids: Vec<usize> },
    Unfold { x: Var, width: usize },
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    Max { x: Var, at: usize },
    MeanRows(Var),
    MaxRows { x: Var, at: Vec<usize> },
    BceWithLogits { logit: Var, target: T },
    #[cfg(test)]
    BrokenSigmoid(Var),
}

struct Node<'a, T: Real> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Operation tape. Values are computed as nodes are added.
pub struct Graph<'a, T: Real> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Real> Default for Graph<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// `None` for nodes that do not require gradients or that the loss does
    /// not depend on.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<'a, T: Real> Graph<'a, T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Cow<'a, Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    /// Constant input.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    /// Borrowed leaf, typically a model parameter.
    pub fn param(&mut self, t: &'a Tensor<T>, requires_grad: bool) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, requires_grad)
    }

    /// Owned leaf that participates in differentiation.
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    /// Dispatches one of the generic operations by kind.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize, op: &'static str| {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(Error::shape(op, format!("expected {n} inputs, got {}", inputs.len())))
            }
        };
        match kind {
            OpKind::MatMul => arity(2, "matmul").and_then(|_| self.matmul(inputs[0], inputs[1])),
            OpKind::Add => arity(2, "add").and_then(|_| self.add(inputs[0], inputs[1])),
            OpKind::Mul => arity(2, "mul").and_then(|_| self.mul(inputs[0], inputs[1])),
            OpKind::Concat => self.concat(inputs),
            OpKind::Slice { start, len } => arity(1, "slice").and_then(|_| self.slice(inputs[0], start, len)),
            OpKind::Sigmoid => arity(1, "sigmoid").map(|_| self.sigmoid(inputs[0])),
            OpKind::Tanh => arity(1, "tanh").map(|_| self.tanh(inputs[0])),
            OpKind::Softmax => arity(1, "softmax").and_then(|_| self.softmax(inputs[0])),
            OpKind::Mean => arity(1, "mean").map(|_| self.mean(inputs[0])),
            OpKind::Max => arity(1, "max").and_then(|_| self.max(inputs[0])),
            OpKind::Sum => arity(1, "sum").map(|_| self.sum(inputs[0])),
        }
    }

    /// Matrix product. A rank-1 left operand is a row vector, a rank-1 right
    /// operand a column vector; the corresponding output axis is dropped.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k1, a_vec) = match sa.as_slice() {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}"))),
        };
        let (k2, n, b_vec) = match sb.as_slice() {
            [k] if !a_vec => (*k, 1, true),
            [k, n] => (*k, *n, false),
            _ => return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}"))),
        };
        if k1 != k2 {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let k = k1;
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let arow = &ad[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av == T::zero() {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        let shape = match (a_vec, b_vec) {
            (true, _) => vec![n],
            (_, true) => vec![m],
            _ => vec![m, n],
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.derived(value, Op::MatMul { a, b, m, k, n }, &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape().to_vec(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let x = self.value(a);
        Tensor::new(x.shape().to_vec(), x.data().iter().map(|&p| f(p)).collect()).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.zip_with(a, b, |p, q| p + q);
        Ok(self.derived(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.zip_with(a, b, |p, q| p - q);
        Ok(self.derived(v, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.zip_with(a, b, |p, q| p * q);
        Ok(self.derived(v, Op::Mul(a, b), &[a, b]))
    }

    /// Adds vector `row` to every row of `x` (or to `x` itself if it is a
    /// vector).
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        let cols = *sx.last().unwrap_or(&0);
        if sr.len() != 1 || sx.is_empty() || sx.len() > 2 || sr[0] != cols {
            return Err(Error::shape("add_row", format!("{sx:?} + {sr:?}")));
        }
        let r = self.value(row).data();
        let xv = self.value(x);
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &p)| p + r[i % cols])
            .collect();
        let v = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.derived(v, Op::AddRow(x, row), &[x, row]))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let v = self.map(x, |p| p * c);
        self.derived(v, Op::Scale(x, c), &[x])
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let mut data = Vec::new();
        for &x in xs {
            if self.shape(x).len() != 1 {
                return Err(Error::shape("concat", format!("expected vectors, got {:?}", self.shape(x))));
            }
            data.extend_from_slice(self.value(x).data());
        }
        let v = Tensor::vector(data);
        Ok(self.derived(v, Op::Concat(xs.to_vec()), xs))
    }

    /// Stacks equal-length vectors into a matrix, one per row.
    pub fn stack_rows(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::shape("stack_rows", "no inputs"));
        };
        let width = self.shape(first).to_vec();
        if width.len() != 1 {
            return Err(Error::shape("stack_rows", format!("expected vectors, got {width:?}")));
        }
        let mut data = Vec::with_capacity(xs.len() * width[0]);
        for &x in xs {
            if self.shape(x) != width.as_slice() {
                return Err(Error::shape("stack_rows", format!("{:?} vs {width:?}", self.shape(x))));
            }
            data.extend_from_slice(self.value(x).data());
        }
        let v = Tensor::matrix(xs.len(), width[0], data)?;
        Ok(self.derived(v, Op::StackRows(xs.to_vec()), xs))
    }

    /// Contiguous range of the flattened data, as a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.value(x).numel();
        if start + len > n || len == 0 {
            return Err(Error::shape(
                "slice",
                format!("[{start}, {}) out of {:?}", start + len, self.shape(x)),
            ));
        }
        let v = Tensor::vector(self.value(x).data()[start..start + len].to_vec());
        Ok(self.derived(v, Op::Slice { x, start }, &[x]))
    }

    /// Row `i` of a matrix.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        match *self.shape(x) {
            [r, c] if i < r => self.slice(x, i * c, c),
            _ => Err(Error::shape("row", format!("row {i} of {:?}", self.shape(x)))),
        }
    }

    /// Selects rows `ids` of a matrix (embedding lookup).
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let [rows, cols] = *self.shape(table) else {
            return Err(Error::shape("gather", format!("table {:?}", self.shape(table))));
        };
        if ids.is_empty() {
            return Err(Error::shape("gather", "no ids"));
        }
        let t = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(Error::shape("gather", format!("id {id} >= {rows} rows")));
            }
            data.extend_from_slice(t.row(id));
        }
        let v = Tensor::matrix(ids.len(), cols, data)?;
        Ok(self.derived(v, Op::Gather { table, ids: ids.to_vec() }, &[table]))
    }

    /// Sliding windows of `width` rows, each flattened into one output row:
    /// `[t, d] -> [t - width + 1, width * d]`.
    pub fn unfold(&mut self, x: Var, width: usize) -> Result<Var> {
        let [t, d] = *self.shape(x) else {
            return Err(Error::shape("unfold", format!("{:?}", self.shape(x))));
        };
        if width == 0 || width > t {
            return Err(Error::shape("unfold", format!("width {width} over {t} rows")));
        }
        let src = self.value(x).data();
        let windows = t - width + 1;
        let mut data = Vec::with_capacity(windows * width * d);
        for i in 0..windows {
            data.extend_from_slice(&src[i * d..(i + width) * d]);
        }
        let v = Tensor::matrix(windows, width * d, data)?;
        Ok(self.derived(v, Op::Unfold { x, width }, &[x]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.map(x, sigmoid);
        self.derived(v, Op::Sigmoid(x), &[x])
    }

    #[cfg(test)]
    pub(crate) fn broken_sigmoid(&mut self, x: Var) -> Var {
        let v = self.map(x, sigmoid);
        self.derived(v, Op::BrokenSigmoid(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.map(x, |p| p.tanh());
        self.derived(v, Op::Tanh(x), &[x])
    }

    /// Softmax over a vector, computed with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        if self.shape(x).len() != 1 || self.value(x).numel() == 0 {
            return Err(Error::shape("softmax", format!("{:?}", self.shape(x))));
        }
        let d = self.value(x).data();
        let mx = d.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = d.iter().map(|&p| (p - mx).exp()).collect();
        let z: T = e.iter().copied().sum();
        let v = Tensor::vector(e.into_iter().map(|p| p / z).collect());
        Ok(self.derived(v, Op::Softmax(x), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        self.derived(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s: T = t.data().iter().copied().sum();
        let m = s / T::from_f64(t.numel().max(1) as f64);
        self.derived(Tensor::scalar(m), Op::Mean(x), &[x])
    }

    /// Maximum element; ties resolve to the first occurrence.
    pub fn max(&mut self, x: Var) -> Result<Var> {
        let d = self.value(x).data();
        if d.is_empty() {
            return Err(Error::shape("max", "empty tensor"));
        }
        let mut at = 0;
        for (i, &p) in d.iter().enumerate() {
            if p > d[at] {
                at = i;
            }
        }
        let v = Tensor::scalar(d[at]);
        Ok(self.derived(v, Op::Max { x, at }, &[x]))
    }

    /// Column means of a matrix: `[m, n] -> [n]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let [m, n] = *self.shape(x) else {
            return Err(Error::shape("mean_rows", format!("{:?}", self.shape(x))));
        };
        let d = self.value(x).data();
        let inv = T::one() / T::from_f64(m as f64);
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            for (o, &p) in out.iter_mut().zip(&d[i * n..(i + 1) * n]) {
                *o += p;
            }
        }
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(self.derived(Tensor::vector(out), Op::MeanRows(x), &[x]))
    }

    /// Column maxima of a matrix (max over time): `[m, n] -> [n]`.
    pub fn max_rows(&mut self, x: Var) -> Result<Var> {
        let [m, n] = *self.shape(x) else {
            return Err(Error::shape("max_rows", format!("{:?}", self.shape(x))));
        };
        if m == 0 {
            return Err(Error::shape("max_rows", "no rows"));
        }
        let d = self.value(x).data();
        let mut at = vec![0usize; n];
        for i in 1..m {
            for j in 0..n {
                if d[i * n + j] > d[at[j] * n + j] {
                    at[j] = i;
                }
            }
        }
        let out = (0..n).map(|j| d[at[j] * n + j]).collect();
        Ok(self.derived(Tensor::vector(out), Op::MaxRows { x, at }, &[x]))
    }

    /// Binary cross-entropy of `sigmoid(logit)` against a 0/1 target.
    pub fn bce_with_logits(&mut self, logit: Var, target: T) -> Result<Var> {
        let Some(z) = self.value(logit).item() else {
            return Err(Error::shape("bce_with_logits", format!("{:?}", self.shape(logit))));
        };
        let loss = z.max(T::zero()) - z * target + (T::one() + (-z.abs()).exp()).ln();
        Ok(self.derived(Tensor::scalar(loss), Op::BceWithLogits { logit, target }, &[logit]))
    }

    /// Reverse pass from a scalar loss. Gradients accumulate additively
    /// where a node feeds several consumers.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::filled(self.shape(loss), T::one()));
        }
        for i in (0..=loss.0).rev() {
            let (lower, upper) = grads.split_at_mut(i);
            let Some(g) = upper[0].as_ref() else {
                continue;
            };
            self.backprop_node(i, g, lower);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, i: usize, g: &Tensor<T>, lower: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[i];
        let out = node.value.as_ref();
        let gd = g.data();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = lower[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)));
            f(slot.data_mut());
        };
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul { a, b, m, k, n } => {
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                // dA = dC B^T
                acc(a, &mut |ga| {
                    for r in 0..m {
                        let grow = &gd[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let mut s = T::zero();
                            for (&x, &y) in grow.iter().zip(brow) {
                                s += x * y;
                            }
                            ga[r * k + p] += s;
                        }
                    }
                });
                // dB = A^T dC
                acc(b, &mut |gb| {
                    for r in 0..m {
                        let grow = &gd[r * n..(r + 1) * n];
                        for p in 0..k {
                            let av = ad[r * k + p];
                            if av == T::zero() {
                                continue;
                            }
                            for (o, &x) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += av * x;
                            }
                        }
                    }
                });
            }
            &Op::Add(a, b) => {
                acc(a, &mut |ga| add_into(ga, gd));
                acc(b, &mut |gb| add_into(gb, gd));
            }
            &Op::Sub(a, b) => {
                acc(a, &mut |ga| add_into(ga, gd));
                acc(b, &mut |gb| gb.iter_mut().zip(gd).for_each(|(o, &x)| *o -= x));
            }
            &Op::Mul(a, b) => {
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                acc(a, &mut |ga| {
                    for j in 0..gd.len() {
                        ga[j] += gd[j] * bd[j];
                    }
                });
                acc(b, &mut |gb| {
                    for j in 0..gd.len() {
                        gb[j] += gd[j] * ad[j];
                    }
                });
            }
            &Op::AddRow(x, row) => {
                acc(x, &mut |gx| add_into(gx, gd));
                acc(row, &mut |gr| {
                    let cols = gr.len();
                    for (j, &x) in gd.iter().enumerate() {
                        gr[j % cols] += x;
                    }
                });
            }
            &Op::Scale(x, c) => acc(x, &mut |gx| gx.iter_mut().zip(gd).for_each(|(o, &p)| *o += p * c)),
            Op::Concat(xs) | Op::StackRows(xs) => {
                let mut off = 0;
                for &x in xs {
                    let len = self.value(x).numel();
                    acc(x, &mut |gx| add_into(gx, &gd[off..off + len]));
                    off += len;
                }
            }
            &Op::Slice { x, start } => acc(x, &mut |gx| add_into(&mut gx[start..start + gd.len()], gd)),
            Op::Gather { table, ids } => {
                let cols = self.shape(*table)[1];
                acc(*table, &mut |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * cols..(id + 1) * cols], &gd[r * cols..(r + 1) * cols]);
                    }
                });
            }
            &Op::Unfold { x, width } => {
                let d = self.shape(x)[1];
                let span = width * d;
                acc(x, &mut |gx| {
                    for w in 0..gd.len() / span {
                        add_into(&mut gx[w * d..w * d + span], &gd[w * span..(w + 1) * span]);
                    }
                });
            }
            &Op::Sigmoid(x) => {
                let od = out.data();
                acc(x, &mut |gx| {
                    for j in 0..gd.len() {
                        gx[j] += gd[j] * od[j] * (T::one() - od[j]);
                    }
                });
            }
            #[cfg(test)]
            &Op::BrokenSigmoid(x) => {
                let od = out.data();
                acc(x, &mut |gx| {
                    for j in 0..gd.len() {
                        gx[j] += gd[j] * od[j];
                    }
                });
            }
            &Op::Tanh(x) => {
                let od = out.data();
                acc(x, &mut |gx| {
                    for j in 0..gd.len() {
                        gx[j] += gd[j] * (T::one() - od[j] * od[j]);
                    }
                });
            }
            &Op::Softmax(x) => {
                let od = out.data();
                let dot: T = gd.iter().zip(od).map(|(&p, &q)| p * q).sum();
                acc(x, &mut |gx| {
                    for j in 0..gd.len() {
                        gx[j] += od[j] * (gd[j] - dot);
                    }
                });
            }
            &Op::Sum(x) => acc(x, &mut |gx| gx.iter_mut().for_each(|o| *o += gd[0])),
            &Op::Mean(x) => {
                let n = T::from_f64(self.value(x).numel().max(1) as f64);
                acc(x, &mut |gx| gx.iter_mut().for_each(|o| *o += gd[0] / n));
            }
            &Op::Max { x, at } => acc(x, &mut |gx| gx[at] += gd[0]),
            &Op::MeanRows(x) => {
                let m = self.shape(x)[0];
                let inv = T::one() / T::from_f64(m as f64);
                acc(x, &mut |gx| {
                    for (j, o) in gx.iter_mut().enumerate() {
                        *o += gd[j % gd.len()] * inv;
                    }
                });
            }
            Op::MaxRows { x, at } => {
                let n = at.len();
                acc(*x, &mut |gx| {
                    for (j, &r) in at.iter().enumerate() {
                        gx[r * n + j] += gd[j];
                    }
                });
            }
            &Op::BceWithLogits { logit, target } => {
                let z = self.value(logit).data()[0];
                acc(logit, &mut |gz| gz[0] += gd[0] * (sigmoid(z) - target));
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (o, &x) in dst.iter_mut().zip(src) {
        *o += x;
    }
}
