//! Dynamic computation record. Every op appends a node holding its forward
//! value; [`Graph::backward`] walks the nodes in reverse creation order,
//! which is a valid reverse topological order because inputs always
//! precede their consumers.

use super::{mismatch, Tensor, TensorError};

/// Handle to a node in a [`Graph`].
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
    MatMul(Var, Var),
    /// Same-shape add, or row-broadcast when the right operand is rank 1.
    Add(Var, Var),
    Mul(Var, Var),
    ConcatLast(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceLast {
        src: Var,
        start: usize,
    },
    Reshape(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    /// Cached row-wise probabilities, targets, mask, active row count.
    CrossEntropy {
        logits: Var,
        probs: Vec<f64>,
        targets: Vec<usize>,
        mask: Vec<bool>,
        count: usize,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn finite(op: &'static str, t: Tensor) -> Result<Tensor, TensorError> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(TensorError::NonFiniteValue { op })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize), TensorError> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(mismatch(op, format!("expected rank 2, got {s:?}"))),
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`
fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Record a leaf (parameter or constant). Gradients are kept for all leaves.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = dims2("matmul", self.value(a))?;
        let (k2, n) = dims2("matmul", self.value(b))?;
        if k != k2 {
            return Err(mismatch("matmul", format!("[{m}×{k}]·[{k2}×{n}]")));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(
            self.value(a).data(),
            self.value(b).data(),
            m,
            k,
            n,
            &mut out,
        );
        let t = finite("matmul", Tensor::raw(vec![m, n], out))?;
        Ok(self.push(Op::MatMul(a, b), t))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let data: Vec<f64> = if ta.shape() == tb.shape() {
            ta.data()
                .iter()
                .zip(tb.data())
                .map(|(x, y)| x + y)
                .collect()
        } else if tb.shape().len() == 1 && ta.last_dim() == tb.len() {
            let n = tb.len();
            ta.data()
                .iter()
                .enumerate()
                .map(|(i, x)| x + tb.data()[i % n])
                .collect()
        } else {
            return Err(mismatch(
                "add",
                format!("{:?} + {:?}", ta.shape(), tb.shape()),
            ));
        };
        let t = finite("add", Tensor::raw(ta.shape().to_vec(), data))?;
        Ok(self.push(Op::Add(a, b), t))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(
                "mul",
                format!("{:?} ⊙ {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let t = finite("mul", Tensor::raw(ta.shape().to_vec(), data))?;
        Ok(self.push(Op::Mul(a, b), t))
    }

    /// Concatenate rank-2 tensors with equal row counts along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        let rows = dims2("concat", self.value(parts[0]))?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = dims2("concat", self.value(p))?;
            if r != rows {
                return Err(mismatch("concat", format!("row counts {rows} and {r}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let t = Tensor::raw(vec![rows, total], data);
        Ok(self.push(Op::ConcatLast(parts.to_vec()), t))
    }

    /// Stack rank-2 tensors with equal column counts along the first axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_rows",
                detail: "no inputs".into(),
            });
        }
        let cols = dims2("concat_rows", self.value(parts[0]))?.1;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = dims2("concat_rows", self.value(p))?;
            if c != cols {
                return Err(mismatch("concat_rows", format!("widths {cols} and {c}")));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let t = Tensor::raw(vec![rows, cols], data);
        Ok(self.push(Op::ConcatRows(parts.to_vec()), t))
    }

    /// Columns `start..start + len` of a rank-2 tensor.
    pub fn slice_last(&mut self, src: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (rows, cols) = dims2("slice_last", self.value(src))?;
        if len == 0 || start + len > cols {
            return Err(mismatch(
                "slice_last",
                format!("columns {start}..{} of {cols}", start + len),
            ));
        }
        let d = self.value(src).data();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&d[r * cols + start..r * cols + start + len]);
        }
        let t = Tensor::raw(vec![rows, len], data);
        Ok(self.push(Op::SliceLast { src, start }, t))
    }

    pub fn reshape(&mut self, src: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let t = Tensor::new(shape.to_vec(), self.value(src).data().to_vec()).map_err(|_| {
            mismatch(
                "reshape",
                format!("{:?} → {shape:?}", self.value(src).shape()),
            )
        })?;
        Ok(self.push(Op::Reshape(src), t))
    }

    fn unary(
        &mut self,
        x: Var,
        op: Op,
        name: &'static str,
        f: fn(f64) -> f64,
    ) -> Result<Var, TensorError> {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| f(v)).collect();
        let t = finite(name, Tensor::raw(tx.shape().to_vec(), data))?;
        Ok(self.push(op, t))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(x, Op::Tanh(x), "tanh", f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(x, Op::Sigmoid(x), "sigmoid", sigmoid)
    }

    /// Max-shifted softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var, TensorError> {
        let tx = self.value(x);
        let n = tx.last_dim();
        let mut data = tx.data().to_vec();
        for row in data.chunks_mut(n) {
            softmax_in_place(row);
        }
        let t = finite("softmax", Tensor::raw(tx.shape().to_vec(), data))?;
        Ok(self.push(Op::Softmax(x), t))
    }

    /// Rows `ids` of a `[V×d]` table, as `[ids.len()×d]`.
    pub fn embedding_gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let (v, d) = dims2("embedding_gather", self.value(table))?;
        if ids.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "embedding_gather",
                detail: "no ids".into(),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(TensorError::InvalidArgument {
                op: "embedding_gather",
                detail: format!("id {bad} out of range for {v} rows"),
            });
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let t = Tensor::raw(vec![ids.len(), d], data);
        Ok(self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            t,
        ))
    }

    /// Mean negative log-likelihood over rows where `mask` is true.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var, TensorError> {
        let (rows, classes) = dims2("cross_entropy", self.value(logits))?;
        if targets.len() != rows || mask.len() != rows {
            return Err(mismatch(
                "cross_entropy",
                format!(
                    "{rows} rows, {} targets, {} mask entries",
                    targets.len(),
                    mask.len()
                ),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(TensorError::InvalidArgument {
                op: "cross_entropy",
                detail: format!("target {bad} out of range for {classes} classes"),
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(TensorError::InvalidArgument {
                op: "cross_entropy",
                detail: "mask selects no rows".into(),
            });
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut total = 0.0;
        for (r, row) in probs.chunks_mut(classes).enumerate() {
            let lse = log_sum_exp(row);
            if mask[r] {
                total += lse - row[targets[r]];
            }
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        let t = finite("cross_entropy", Tensor::scalar(total / count as f64))?;
        Ok(self.push(
            Op::CrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                count,
            },
            t,
        ))
    }

    /// Reverse sweep from a scalar node. Returns gradients of every node that
    /// the loss depends on; leaf gradients are summed over all their uses.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        if self.value(loss).len() != 1 {
            return Err(mismatch(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    if g.iter().any(|v| !v.is_finite()) {
                        return Err(TensorError::NonFiniteGradient);
                    }
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let ta = self.value(*a);
                    let tb = self.value(*b);
                    let (m, k) = (ta.shape()[0], ta.shape()[1]);
                    let n = tb.shape()[1];
                    // dA = dC · Bᵀ
                    let ga = acc(&mut grads, *a, ta.len());
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &tb.data()[p * n..(p + 1) * n];
                            ga[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                    // dB = Aᵀ · dC
                    let gb = acc(&mut grads, *b, tb.len());
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let arp = ta.data()[r * k + p];
                            if arp == 0.0 {
                                continue;
                            }
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += arp * gv;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    let la = self.value(*a).len();
                    let lb = self.value(*b).len();
                    add_into(acc(&mut grads, *a, la), &g);
                    let gb = acc(&mut grads, *b, lb);
                    for (j, v) in g.iter().enumerate() {
                        gb[j % lb] += v;
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = acc(&mut grads, *a, ta.len());
                    for ((o, gv), y) in ga.iter_mut().zip(&g).zip(tb.data()) {
                        *o += gv * y;
                    }
                    let gb = acc(&mut grads, *b, tb.len());
                    for ((o, gv), x) in gb.iter_mut().zip(&g).zip(ta.data()) {
                        *o += gv * x;
                    }
                }
                Op::ConcatLast(parts) => {
                    let rows = node.value.shape()[0];
                    let total = node.value.shape()[1];
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).shape()[1];
                        let gp = acc(&mut grads, p, rows * w);
                        for r in 0..rows {
                            add_into(
                                &mut gp[r * w..(r + 1) * w],
                                &g[r * total + offset..r * total + offset + w],
                            );
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        add_into(acc(&mut grads, p, len), &g[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::SliceLast { src, start } => {
                    let (rows, cols) = (self.value(*src).shape()[0], self.value(*src).shape()[1]);
                    let w = node.value.shape()[1];
                    let gs = acc(&mut grads, *src, rows * cols);
                    for r in 0..rows {
                        add_into(
                            &mut gs[r * cols + start..r * cols + start + w],
                            &g[r * w..(r + 1) * w],
                        );
                    }
                }
                Op::Reshape(src) => {
                    add_into(acc(&mut grads, *src, g.len()), &g);
                }
                Op::Tanh(x) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for ((o, gv), y) in gx.iter_mut().zip(&g).zip(node.value.data()) {
                        *o += gv * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(x) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for ((o, gv), y) in gx.iter_mut().zip(&g).zip(node.value.data()) {
                        *o += gv * y * (1.0 - y);
                    }
                }
                Op::Softmax(x) => {
                    let n = node.value.last_dim();
                    let gx = acc(&mut grads, *x, g.len());
                    for ((orow, grow), yrow) in gx
                        .chunks_mut(n)
                        .zip(g.chunks(n))
                        .zip(node.value.data().chunks(n))
                    {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((o, gv), y) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += y * (gv - dot);
                        }
                    }
                }
                Op::Gather { table, ids } => {
                    let (v, d) = (self.value(*table).shape()[0], self.value(*table).shape()[1]);
                    let gt = acc(&mut grads, *table, v * d);
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
                Op::CrossEntropy {
                    logits,
                    probs,
                    targets,
                    mask,
                    count,
                } => {
                    let classes = self.value(*logits).last_dim();
                    let scale = g[0] / *count as f64;
                    let gl = acc(&mut grads, *logits, probs.len());
                    for (r, (orow, prow)) in gl
                        .chunks_mut(classes)
                        .zip(probs.chunks(classes))
                        .enumerate()
                    {
                        if !mask[r] {
                            continue;
                        }
                        for (c, (o, p)) in orow.iter_mut().zip(prow).enumerate() {
                            let onehot = if c == targets[r] { 1.0 } else { 0.0 };
                            *o += scale * (p - onehot);
                        }
                    }
                }
            }
        }

        let shapes = self.nodes[..=loss.0]
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of a leaf, or `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::raw(self.shapes[v.0].clone(), g.clone()))
    }

    /// Gradient of a leaf, zeros when the loss does not depend on it.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}
