use std::sync::Arc;

use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};

/// Shared, immutable index list used by gather and scatter nodes.
pub type Indices = Arc<[usize]>;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScalarMul { scalar: Var, tensor: Var },
    MatMul(Var, Var),
    Concat { parts: Vec<Var>, axis: usize },
    Gather { src: Var, index: Indices },
    ScatterAdd { messages: Var, index: Indices },
    Relu(Var),
    Sigmoid(Var),
    LayerNorm { input: Var, inv_std: Vec<f64> },
    Sum { input: Var, axis: Option<usize> },
    ComplexHadamard(Var, Var),
    BceWithLogits { pos: Var, neg: Var },
    Sinusoid { omega: Var, times: Arc<[f64]> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// list is already a topological order of the computation DAG.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    record_activations: bool,
    activations: Vec<bool>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the sign pattern of every relu input. Used by gradient checks
    /// to skip perturbations that cross a kink.
    pub fn with_activation_recording() -> Self {
        Self {
            record_activations: true,
            ..Self::default()
        }
    }

    pub fn activation_pattern(&self) -> &[bool] {
        &self.activations
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::from_parts(va.shape().to_vec(), data);
        let rg = self.needs(a) || self.needs(b);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// Multiply by a constant.
    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let va = &self.nodes[a.0].value;
        let data = va.data().iter().map(|x| x * factor).collect();
        let value = Tensor::from_parts(va.shape().to_vec(), data);
        let rg = self.needs(a);
        self.push(value, Op::Scale(a, factor), rg)
    }

    /// Multiply every element of `tensor` by the single-element `scalar`.
    pub fn scalar_mul(&mut self, scalar: Var, tensor: Var) -> Result<Var> {
        if self.value(scalar).len() != 1 {
            return Err(Error::shape("scalar_mul", self.shape(scalar), &[1, 1]));
        }
        let s = self.value(scalar).item();
        let vt = &self.nodes[tensor.0].value;
        let data = vt.data().iter().map(|x| x * s).collect();
        let value = Tensor::from_parts(vt.shape().to_vec(), data);
        let rg = self.needs(scalar) || self.needs(tensor);
        Ok(self.push(value, Op::ScalarMul { scalar, tensor }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (n, k, m) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; n * m];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, n, k, m);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::MatMul(a, b), rg))
    }

    /// Concatenate rank-2 tensors along axis 0 (rows) or 1 (columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::DimensionMismatch("concat of zero tensors".into()))?;
        let s0 = self.shape(first).to_vec();
        if s0.len() != 2 || axis > 1 {
            return Err(Error::shape("concat", &s0, &[axis]));
        }
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[1 - axis] != s0[1 - axis] {
                return Err(Error::shape("concat", &s0, s));
            }
        }
        let value = if axis == 0 {
            let rows = parts.iter().map(|&p| self.shape(p)[0]).sum();
            let mut data = Vec::with_capacity(rows * s0[1]);
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
            Tensor::from_parts(vec![rows, s0[1]], data)
        } else {
            let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
            let rows = s0[0];
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for &p in parts {
                    data.extend_from_slice(self.value(p).row_slice(r));
                }
            }
            Tensor::from_parts(vec![rows, cols], data)
        };
        let rg = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Select rows of `src` (repeats allowed).
    pub fn gather(&mut self, src: Var, index: Indices) -> Result<Var> {
        let s = self.shape(src);
        if s.len() != 2 || index.is_empty() {
            return Err(Error::shape("gather", s, &[index.len()]));
        }
        let (rows, cols) = (s[0], s[1]);
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::IndexOutOfRange {
                what: "gather row",
                index: bad,
                bound: rows,
            });
        }
        let v = self.value(src);
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            data.extend_from_slice(v.row_slice(i));
        }
        let value = Tensor::from_parts(vec![index.len(), cols], data);
        let rg = self.needs(src);
        Ok(self.push(value, Op::Gather { src, index }, rg))
    }

    /// Sum message rows into a `rows x cols` zero tensor at the given target
    /// rows. With no messages (empty index) the result is the zero tensor.
    pub fn scatter_add(
        &mut self,
        rows: usize,
        cols: usize,
        index: Indices,
        messages: Option<Var>,
    ) -> Result<Var> {
        let Some(messages) = messages else {
            if !index.is_empty() {
                return Err(Error::shape("scatter_add", &[index.len()], &[0]));
            }
            return Ok(self.constant(Tensor::zeros(&[rows, cols])));
        };
        let s = self.shape(messages);
        if s.len() != 2 || s[0] != index.len() || s[1] != cols {
            return Err(Error::shape("scatter_add", s, &[index.len(), cols]));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::IndexOutOfRange {
                what: "scatter_add row",
                index: bad,
                bound: rows,
            });
        }
        let mut out = vec![0.0; rows * cols];
        let mv = self.value(messages);
        for (r, &t) in index.iter().enumerate() {
            for (o, m) in out[t * cols..(t + 1) * cols].iter_mut().zip(mv.row_slice(r)) {
                *o += m;
            }
        }
        let rg = self.needs(messages);
        Ok(self.push(
            Tensor::from_parts(vec![rows, cols], out),
            Op::ScatterAdd { messages, index },
            rg,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = &self.nodes[a.0].value;
        if self.record_activations {
            self.activations.extend(va.data().iter().map(|&x| x > 0.0));
        }
        let data = va.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let value = Tensor::from_parts(va.shape().to_vec(), data);
        let rg = self.needs(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let va = &self.nodes[a.0].value;
        let data = va.data().iter().map(|&x| sigmoid(x)).collect();
        let value = Tensor::from_parts(va.shape().to_vec(), data);
        let rg = self.needs(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Row-wise standardization `(x - mean) / sqrt(var + eps)`, no affine part.
    pub fn layer_normalize(&mut self, a: Var, eps: f64) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        if !va.is_matrix() {
            return Err(Error::shape("layer_normalize", va.shape(), &[0, 0]));
        }
        let (rows, cols) = (va.rows(), va.cols());
        let mut data = Vec::with_capacity(rows * cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = va.row_slice(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std.push(inv);
            data.extend(row.iter().map(|x| (x - mean) * inv));
        }
        let value = Tensor::from_parts(vec![rows, cols], data);
        let rg = self.needs(a);
        Ok(self.push(value, Op::LayerNorm { input: a, inv_std }, rg))
    }

    /// Sum of all elements (`None`), over rows (`Some(0)`) or over columns
    /// (`Some(1)`).
    pub fn sum(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        let value = match axis {
            None => Tensor::scalar(va.data().iter().sum()),
            Some(ax) if va.is_matrix() && ax < 2 => {
                let (rows, cols) = (va.rows(), va.cols());
                if ax == 0 {
                    let mut out = vec![0.0; cols];
                    for r in 0..rows {
                        for (o, x) in out.iter_mut().zip(va.row_slice(r)) {
                            *o += x;
                        }
                    }
                    Tensor::from_parts(vec![1, cols], out)
                } else {
                    let out = (0..rows).map(|r| va.row_slice(r).iter().sum()).collect();
                    Tensor::from_parts(vec![rows, 1], out)
                }
            }
            Some(ax) => return Err(Error::shape("sum", va.shape(), &[ax])),
        };
        let rg = self.needs(a);
        Ok(self.push(value, Op::Sum { input: a, axis }, rg))
    }

    /// Elementwise complex product, reading consecutive value pairs as
    /// `(re, im)`.
    pub fn complex_hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("complex_hadamard", a, b)?;
        if !self.value(a).len().is_multiple_of(2) || !self.value(a).cols().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(
                "complex_hadamard needs an even last dimension".into(),
            ));
        }
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; va.len()];
        for ((o, x), y) in out
            .chunks_exact_mut(2)
            .zip(va.chunks_exact(2))
            .zip(vb.chunks_exact(2))
        {
            o[0] = x[0] * y[0] - x[1] * y[1];
            o[1] = x[0] * y[1] + x[1] * y[0];
        }
        let value = Tensor::from_parts(self.shape(a).to_vec(), out);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ComplexHadamard(a, b), rg))
    }

    /// `mean(-log sigmoid(pos)) + mean(-log(1 - sigmoid(neg)))`.
    pub fn bce_with_logits(&mut self, pos: Var, neg: Var) -> Var {
        let p = self.value(pos).data();
        let n = self.value(neg).data();
        let lp = p.iter().map(|&x| softplus(-x)).sum::<f64>() / p.len() as f64;
        let ln = n.iter().map(|&x| softplus(x)).sum::<f64>() / n.len() as f64;
        let rg = self.needs(pos) || self.needs(neg);
        self.push(Tensor::scalar(lp + ln), Op::BceWithLogits { pos, neg }, rg)
    }

    /// Sinusoidal table: row `t` is `[sin(w_0 t), cos(w_0 t), sin(w_1 t), ...]`
    /// for frequencies `omega: 1 x h`. Differentiable in the frequencies.
    pub fn sinusoid(&mut self, omega: Var, times: Arc<[f64]>) -> Result<Var> {
        let so = self.shape(omega);
        if so.len() != 2 || so[0] != 1 || times.is_empty() {
            return Err(Error::shape("sinusoid", so, &[times.len()]));
        }
        let w = self.value(omega).data();
        let h = w.len();
        let mut data = Vec::with_capacity(times.len() * 2 * h);
        for &t in times.iter() {
            for &wn in w {
                let (s, c) = (wn * t).sin_cos();
                data.push(s);
                data.push(c);
            }
        }
        let value = Tensor::from_parts(vec![times.len(), 2 * h], data);
        let rg = self.needs(omega);
        Ok(self.push(value, Op::Sinusoid { omega, times }, rg))
    }

    /// Reverse sweep from a single-element root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = &self.nodes[root.0].value;
        if rv.len() != 1 {
            return Err(Error::NonScalarRoot(rv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        grads[root.0] = Some(Tensor::filled(rv.shape(), 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, contribution: Tensor) {
        if !self.needs(var) {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn accumulate_with(
        &self,
        grads: &mut [Option<Tensor>],
        var: Var,
        f: impl FnOnce(&mut [f64]),
    ) {
        if !self.needs(var) {
            return;
        }
        let slot = &mut grads[var.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.shape(var)));
        }
        f(slot.as_mut().unwrap().data_mut());
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate_with(grads, *b, |d| {
                    for (o, x) in d.iter_mut().zip(gd) {
                        *o -= x;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate_with(grads, *a, |d| {
                    for ((o, x), y) in d.iter_mut().zip(gd).zip(vb) {
                        *o += x * y;
                    }
                });
                self.accumulate_with(grads, *b, |d| {
                    for ((o, x), y) in d.iter_mut().zip(gd).zip(va) {
                        *o += x * y;
                    }
                });
            }
            Op::Scale(a, f) => {
                self.accumulate_with(grads, *a, |d| {
                    for (o, x) in d.iter_mut().zip(gd) {
                        *o += x * f;
                    }
                });
            }
            Op::ScalarMul { scalar, tensor } => {
                let s = self.value(*scalar).item();
                let vt = self.value(*tensor).data();
                self.accumulate_with(grads, *scalar, |d| {
                    d[0] += gd.iter().zip(vt).map(|(x, y)| x * y).sum::<f64>();
                });
                self.accumulate_with(grads, *tensor, |d| {
                    for (o, x) in d.iter_mut().zip(gd) {
                        *o += x * s;
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (va.rows(), va.cols(), vb.cols());
                self.accumulate_with(grads, *a, |d| matmul_bt_acc(gd, vb.data(), d, n, m, k));
                self.accumulate_with(grads, *b, |d| matmul_at_acc(va.data(), gd, d, n, k, m));
            }
            Op::Concat { parts, axis } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        self.accumulate_with(grads, p, |d| {
                            for (o, x) in d.iter_mut().zip(&gd[offset..offset + len]) {
                                *o += x;
                            }
                        });
                        offset += len;
                    }
                } else {
                    let total = g.cols();
                    let mut col = 0;
                    for &p in parts {
                        let pc = self.value(p).cols();
                        self.accumulate_with(grads, p, |d| {
                            for (r, drow) in d.chunks_exact_mut(pc).enumerate() {
                                let src = &gd[r * total + col..r * total + col + pc];
                                for (o, x) in drow.iter_mut().zip(src) {
                                    *o += x;
                                }
                            }
                        });
                        col += pc;
                    }
                }
            }
            Op::Gather { src, index } => {
                let cols = g.cols();
                self.accumulate_with(grads, *src, |d| {
                    for (r, &i) in index.iter().enumerate() {
                        let row = &gd[r * cols..(r + 1) * cols];
                        for (o, x) in d[i * cols..(i + 1) * cols].iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                });
            }
            Op::ScatterAdd { messages, index } => {
                let cols = g.cols();
                self.accumulate_with(grads, *messages, |d| {
                    for (r, &i) in index.iter().enumerate() {
                        let row = &gd[i * cols..(i + 1) * cols];
                        for (o, x) in d[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                });
            }
            Op::Relu(a) => {
                let va = self.value(*a).data();
                self.accumulate_with(grads, *a, |d| {
                    for ((o, x), v) in d.iter_mut().zip(gd).zip(va) {
                        if *v > 0.0 {
                            *o += x;
                        }
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                self.accumulate_with(grads, *a, |d| {
                    for ((o, x), s) in d.iter_mut().zip(gd).zip(y) {
                        *o += x * s * (1.0 - s);
                    }
                });
            }
            Op::LayerNorm { input, inv_std } => {
                let y = &node.value;
                let cols = y.cols();
                let n = cols as f64;
                self.accumulate_with(grads, *input, |d| {
                    for (r, inv) in inv_std.iter().enumerate() {
                        let gy = &gd[r * cols..(r + 1) * cols];
                        let yr = y.row_slice(r);
                        let mean_g = gy.iter().sum::<f64>() / n;
                        let mean_gy = gy.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, gv), yv) in d[r * cols..(r + 1) * cols].iter_mut().zip(gy).zip(yr)
                        {
                            *o += inv * (gv - mean_g - yv * mean_gy);
                        }
                    }
                });
            }
            Op::Sum { input, axis } => {
                let shape = self.shape(*input);
                let cols = if shape.len() == 2 { shape[1] } else { 0 };
                self.accumulate_with(grads, *input, |d| match axis {
                    None => {
                        let s = gd[0];
                        d.iter_mut().for_each(|o| *o += s);
                    }
                    Some(0) => {
                        for row in d.chunks_exact_mut(cols) {
                            for (o, x) in row.iter_mut().zip(gd) {
                                *o += x;
                            }
                        }
                    }
                    Some(_) => {
                        for (row, x) in d.chunks_exact_mut(cols).zip(gd) {
                            row.iter_mut().for_each(|o| *o += x);
                        }
                    }
                });
            }
            Op::ComplexHadamard(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate_with(grads, *a, |d| {
                    for ((o, gp), y) in d
                        .chunks_exact_mut(2)
                        .zip(gd.chunks_exact(2))
                        .zip(vb.chunks_exact(2))
                    {
                        o[0] += gp[0] * y[0] + gp[1] * y[1];
                        o[1] += -gp[0] * y[1] + gp[1] * y[0];
                    }
                });
                self.accumulate_with(grads, *b, |d| {
                    for ((o, gp), x) in d
                        .chunks_exact_mut(2)
                        .zip(gd.chunks_exact(2))
                        .zip(va.chunks_exact(2))
                    {
                        o[0] += gp[0] * x[0] + gp[1] * x[1];
                        o[1] += -gp[0] * x[1] + gp[1] * x[0];
                    }
                });
            }
            Op::BceWithLogits { pos, neg } => {
                let s = gd[0];
                let np = self.value(*pos).len() as f64;
                let nn = self.value(*neg).len() as f64;
                let vp = self.value(*pos).data();
                let vn = self.value(*neg).data();
                self.accumulate_with(grads, *pos, |d| {
                    for (o, x) in d.iter_mut().zip(vp) {
                        *o += s * (sigmoid(*x) - 1.0) / np;
                    }
                });
                self.accumulate_with(grads, *neg, |d| {
                    for (o, x) in d.iter_mut().zip(vn) {
                        *o += s * sigmoid(*x) / nn;
                    }
                });
            }
            Op::Sinusoid { omega, times } => {
                let y = node.value.data();
                let h = self.value(*omega).len();
                self.accumulate_with(grads, *omega, |d| {
                    for (r, &t) in times.iter().enumerate() {
                        let base = r * 2 * h;
                        for (n, o) in d.iter_mut().enumerate() {
                            let (s, c) = (y[base + 2 * n], y[base + 2 * n + 1]);
                            *o += t * (gd[base + 2 * n] * c - gd[base + 2 * n + 1] * s);
                        }
                    }
                });
            }
        }
    }
}
