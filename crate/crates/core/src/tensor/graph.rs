use super::{mismatch, Tensor, TensorError};

type Result<T> = std::result::Result<T, TensorError>;

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize, ta: bool, tb: bool },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Sigmoid(usize),
    Tanh(usize),
    Gelu(usize),
    Softmax(usize),
    LayerNorm { a: usize, inv_std: Vec<f64> },
    Embedding { table: usize, ids: Vec<usize> },
    Concat { parts: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize },
    Mean(usize),
    Sum(usize),
    Transpose(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Gelu(_) => "gelu",
            Op::Softmax(_) => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Embedding { .. } => "embedding",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Mean(_) => "mean",
            Op::Sum(_) => "sum",
            Op::Transpose(_) => "transpose",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations for a single forward pass; [`Graph::backward`] then
/// walks the tape in reverse.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` if nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

// C (m x n) = op(A) (m x k) * op(B) (k x n) + beta * C
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths match the logical shapes and strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(TensorError::InvalidAxis {
            op,
            axis: 2,
            shape: s.to_vec(),
        }),
    }
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let inner = C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Var {
        let needs_grad = inputs.iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A trainable leaf whose gradient is reported by [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// First node holding a NaN or infinity, with the op that produced it.
    pub fn first_non_finite(&self) -> Option<(Var, &'static str)> {
        self.nodes
            .iter()
            .position(|n| !n.value.is_finite())
            .map(|i| (Var(i), self.nodes[i].op.name()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_ex(a, false, b, false)
    }

    /// `op(a) * op(b)` where `op` optionally transposes its matrix argument.
    pub fn matmul_ex(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var> {
        let (ar, ac) = dims2("matmul", self.value(a))?;
        let (br, bc) = dims2("matmul", self.value(b))?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(mismatch("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            ta,
            self.value(b).data(),
            tb,
            0.0,
            &mut out,
        );
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(value, Op::MatMul { a: a.0, b: b.0, ta, tb }, &[a.0, b.0]))
    }

    fn zip_same(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(op, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a.0, b.0), &[a.0, b.0]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a.0, b.0), &[a.0, b.0]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a.0, b.0), &[a.0, b.0]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a.0, s), &[a.0])
    }

    fn check_row(&self, op: &'static str, a: Var, row: Var) -> Result<()> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.numel() != va.cols() || vr.rows() != 1 {
            return Err(mismatch(op, va.shape(), vr.shape()));
        }
        Ok(())
    }

    /// Adds a row vector (`[c]` or `[1, c]`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row("add_row", a, row)?;
        let r = self.value(row).data().to_vec();
        let mut v = self.value(a).clone();
        for chunk in v.data_mut().chunks_mut(r.len()) {
            for (x, b) in chunk.iter_mut().zip(&r) {
                *x += b;
            }
        }
        Ok(self.push(v, Op::AddRow(a.0, row.0), &[a.0, row.0]))
    }

    /// Multiplies every row of `a` elementwise by a row vector.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row("mul_row", a, row)?;
        let r = self.value(row).data().to_vec();
        let mut v = self.value(a).clone();
        for chunk in v.data_mut().chunks_mut(r.len()) {
            for (x, b) in chunk.iter_mut().zip(&r) {
                *x *= b;
            }
        }
        Ok(self.push(v, Op::MulRow(a.0, row.0), &[a.0, row.0]))
    }

    /// `x * w + b` for `w: [in, out]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a.0), &[a.0])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a.0), &[a.0])
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(gelu);
        self.push(v, Op::Gelu(a.0), &[a.0])
    }

    /// Softmax along `axis` of a matrix (the last axis for other ranks).
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let rank = self.shape(a).len();
        if rank == 2 && axis == 0 {
            let t = self.transpose(a)?;
            let s = self.softmax(t, 1)?;
            return self.transpose(s);
        }
        if axis + 1 != rank.max(1) {
            return Err(TensorError::InvalidAxis {
                op: "softmax",
                axis,
                shape: self.shape(a).to_vec(),
            });
        }
        let mut v = self.value(a).clone();
        let c = v.cols();
        for row in v.data_mut().chunks_mut(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        Ok(self.push(v, Op::Softmax(a.0), &[a.0]))
    }

    /// Normalizes to zero mean and unit variance along `axis`, no affine terms.
    pub fn layer_norm(&mut self, a: Var, axis: usize, eps: f64) -> Result<Var> {
        let rank = self.shape(a).len();
        if rank == 2 && axis == 0 {
            let t = self.transpose(a)?;
            let s = self.layer_norm(t, 1, eps)?;
            return self.transpose(s);
        }
        if axis + 1 != rank.max(1) {
            return Err(TensorError::InvalidAxis {
                op: "layer_norm",
                axis,
                shape: self.shape(a).to_vec(),
            });
        }
        let mut v = self.value(a).clone();
        let c = v.cols();
        let mut inv_std = Vec::with_capacity(v.rows());
        for row in v.data_mut().chunks_mut(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * inv;
            }
            inv_std.push(inv);
        }
        Ok(self.push(v, Op::LayerNorm { a: a.0, inv_std }, &[a.0]))
    }

    /// Gathers rows of `table` (`[vocab, d]`) by index.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, d) = dims2("embedding", self.value(table))?;
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(TensorError::IndexOutOfRange {
                    op: "embedding",
                    index: id,
                    len: vocab,
                });
            }
            data.extend_from_slice(self.value(table).row(id));
        }
        let v = Tensor::matrix(ids.len(), d, data)?;
        Ok(self.push(
            v,
            Op::Embedding {
                table: table.0,
                ids: ids.to_vec(),
            },
            &[table.0],
        ))
    }

    /// Concatenates matrices along axis 0 (rows) or 1 (columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts.first().ok_or(TensorError::InvalidAxis {
            op: "concat",
            axis,
            shape: vec![],
        })?;
        let (r0, c0) = dims2("concat", self.value(first))?;
        let value = match axis {
            0 => {
                let mut data = Vec::new();
                let mut rows = 0;
                for &p in parts {
                    let (r, c) = dims2("concat", self.value(p))?;
                    if c != c0 {
                        return Err(mismatch("concat", self.shape(first), self.shape(p)));
                    }
                    rows += r;
                    data.extend_from_slice(self.value(p).data());
                }
                Tensor::matrix(rows, c0, data)?
            }
            1 => {
                let mut widths = Vec::with_capacity(parts.len());
                for &p in parts {
                    let (r, c) = dims2("concat", self.value(p))?;
                    if r != r0 {
                        return Err(mismatch("concat", self.shape(first), self.shape(p)));
                    }
                    widths.push(c);
                }
                let total: usize = widths.iter().sum();
                let mut data = Vec::with_capacity(r0 * total);
                for i in 0..r0 {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row(i));
                    }
                }
                Tensor::matrix(r0, total, data)?
            }
            _ => {
                return Err(TensorError::InvalidAxis {
                    op: "concat",
                    axis,
                    shape: self.shape(first).to_vec(),
                })
            }
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(
            value,
            Op::Concat {
                parts: ids.clone(),
                axis,
            },
            &ids,
        ))
    }

    /// `len` rows (axis 0) or columns (axis 1) starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let (r, c) = dims2("slice", self.value(a))?;
        let extent = match axis {
            0 => r,
            1 => c,
            _ => {
                return Err(TensorError::InvalidAxis {
                    op: "slice",
                    axis,
                    shape: self.shape(a).to_vec(),
                })
            }
        };
        if start + len > extent {
            return Err(TensorError::IndexOutOfRange {
                op: "slice",
                index: start + len,
                len: extent,
            });
        }
        let src = self.value(a);
        let value = if axis == 0 {
            Tensor::matrix(len, c, src.data()[start * c..(start + len) * c].to_vec())?
        } else {
            let mut data = Vec::with_capacity(r * len);
            for i in 0..r {
                data.extend_from_slice(&src.row(i)[start..start + len]);
            }
            Tensor::matrix(r, len, data)?
        };
        Ok(self.push(value, Op::Slice { a: a.0, axis, start }, &[a.0]))
    }

    /// Mean of all elements, as a one-element tensor.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let v = Tensor::scalar(t.data().iter().sum::<f64>() / t.numel().max(1) as f64);
        self.push(v, Op::Mean(a.0), &[a.0])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::Sum(a.0), &[a.0])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = dims2("transpose", self.value(a))?;
        let src = self.value(a).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let v = Tensor::matrix(c, r, data)?;
        Ok(self.push(v, Op::Transpose(a.0), &[a.0]))
    }

    /// Reverse-mode sweep from a one-element `loss`. Gradients accumulate
    /// additively into every node that feeds the loss.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn backward_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let mut acc = |j: usize, t: Tensor| {
            if !self.nodes[j].needs_grad {
                return;
            }
            match &mut grads[j] {
                Some(existing) => existing.add_assign(&t),
                slot => *slot = Some(t),
            }
        };
        let val = |j: usize| &self.nodes[j].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                let (va, vb) = (val(*a), val(*b));
                let (m, n) = (out.rows(), out.cols());
                let k = if *ta { va.rows() } else { va.cols() };
                if self.nodes[*a].needs_grad {
                    // dA = dC * op(B)^T, transposed back if A was transposed
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, vb.data(), !*tb, 0.0, &mut da);
                    let da = if *ta { transpose_raw(&da, m, k) } else { da };
                    acc(*a, Tensor::new(va.shape().to_vec(), da).unwrap());
                }
                if self.nodes[*b].needs_grad {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, va.data(), !*ta, g.data(), false, 0.0, &mut db);
                    let db = if *tb { transpose_raw(&db, k, n) } else { db };
                    acc(*b, Tensor::new(vb.shape().to_vec(), db).unwrap());
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, zip(g, vb, |x, y| x * y));
                acc(*b, zip(g, va, |x, y| x * y));
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
            Op::AddRow(a, r) => {
                acc(*a, g.clone());
                acc(*r, column_sums(g, val(*r).shape()));
            }
            Op::MulRow(a, r) => {
                let (va, vr) = (val(*a), val(*r));
                let c = vr.numel();
                let mut da = g.clone();
                for chunk in da.data_mut().chunks_mut(c) {
                    for (x, w) in chunk.iter_mut().zip(vr.data()) {
                        *x *= w;
                    }
                }
                acc(*a, da);
                let prod = zip(g, va, |x, y| x * y);
                acc(*r, column_sums(&prod, vr.shape()));
            }
            Op::Sigmoid(a) => acc(*a, zip(g, out, |g, y| g * y * (1.0 - y))),
            Op::Tanh(a) => acc(*a, zip(g, out, |g, y| g * (1.0 - y * y))),
            Op::Gelu(a) => acc(*a, zip(g, val(*a), |g, x| g * gelu_grad(x))),
            Op::Softmax(a) => {
                let c = out.cols();
                let mut da = vec![0.0; out.numel()];
                for ((dx, y), gr) in da
                    .chunks_mut(c)
                    .zip(out.data().chunks(c))
                    .zip(g.data().chunks(c))
                {
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for ((d, y), g) in dx.iter_mut().zip(y).zip(gr) {
                        *d = y * (g - dot);
                    }
                }
                acc(*a, Tensor::new(out.shape().to_vec(), da).unwrap());
            }
            Op::LayerNorm { a, inv_std } => {
                let c = out.cols();
                let n = c as f64;
                let mut da = vec![0.0; out.numel()];
                for (((dx, xh), gr), inv) in da
                    .chunks_mut(c)
                    .zip(out.data().chunks(c))
                    .zip(g.data().chunks(c))
                    .zip(inv_std)
                {
                    let sum_g: f64 = gr.iter().sum();
                    let sum_gx: f64 = gr.iter().zip(xh).map(|(g, x)| g * x).sum();
                    for ((d, x), g) in dx.iter_mut().zip(xh).zip(gr) {
                        *d = inv / n * (n * g - sum_g - x * sum_gx);
                    }
                }
                acc(*a, Tensor::new(out.shape().to_vec(), da).unwrap());
            }
            Op::Embedding { table, ids } => {
                let vt = val(*table);
                let d = vt.cols();
                let mut dt = Tensor::zeros(vt.shape());
                for (row, &id) in ids.iter().enumerate() {
                    let dst = &mut dt.data_mut()[id * d..(id + 1) * d];
                    for (x, y) in dst.iter_mut().zip(g.row(row)) {
                        *x += y;
                    }
                }
                acc(*table, dt);
            }
            Op::Concat { parts, axis } => {
                let mut offset = 0;
                for &p in parts {
                    let shape = val(p).shape().to_vec();
                    let (r, c) = (shape[0], shape[1]);
                    let data = if *axis == 0 {
                        let w = g.cols();
                        g.data()[offset * w..(offset + r) * w].to_vec()
                    } else {
                        (0..r).flat_map(|i| g.row(i)[offset..offset + c].to_vec()).collect()
                    };
                    offset += if *axis == 0 { r } else { c };
                    acc(p, Tensor::new(shape, data).unwrap());
                }
            }
            Op::Slice { a, axis, start } => {
                let va = val(*a);
                let mut da = Tensor::zeros(va.shape());
                let c = va.cols();
                if *axis == 0 {
                    da.data_mut()[start * c..start * c + g.numel()].copy_from_slice(g.data());
                } else {
                    let len = g.cols();
                    for i in 0..va.rows() {
                        da.data_mut()[i * c + start..i * c + start + len]
                            .copy_from_slice(g.row(i));
                    }
                }
                acc(*a, da);
            }
            Op::Mean(a) => {
                let va = val(*a);
                let s = g.item() / va.numel().max(1) as f64;
                acc(*a, Tensor::full(va.shape(), s));
            }
            Op::Sum(a) => acc(*a, Tensor::full(val(*a).shape(), g.item())),
            Op::Transpose(a) => {
                let (r, c) = (out.rows(), out.cols());
                let data = transpose_raw(g.data(), r, c);
                acc(*a, Tensor::new(val(*a).shape().to_vec(), data).unwrap());
            }
        }
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).unwrap()
}

fn column_sums(g: &Tensor, shape: &[usize]) -> Tensor {
    let c = g.cols();
    let mut sums = vec![0.0; c];
    for row in g.data().chunks(c) {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
    }
    Tensor::new(shape.to_vec(), sums).unwrap()
}

fn transpose_raw(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = src[i * cols + j];
        }
    }
    out
}
