//! The tape. Every value is a row-major `rows × cols` matrix; scalars are 1×1.
//!
//! A [`Graph`] borrows the [`ParamStore`] it reads parameters from, records
//! each operation as it is applied, and [`Graph::backward`] walks the tape in
//! reverse. Parameter values are read in place, never copied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernels::{gemm, Layout};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Float;
use crate::NnError;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Value<'s, T> {
    Owned(Vec<T>),
    Borrowed(&'s [T]),
}

enum Op<T> {
    Leaf,
    Param,
    MatMul { a: Var, b: Var, transpose_b: bool },
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, rstd: Vec<T> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<T>, count: usize },
    Sum(Var),
}

struct Node<'s, T> {
    rows: usize,
    cols: usize,
    value: Value<'s, T>,
    op: Op<T>,
    needs_grad: bool,
}

impl<T> Node<'_, T> {
    fn data(&self) -> &[T] {
        match &self.value {
            Value::Owned(v) => v,
            Value::Borrowed(v) => v,
        }
    }
}

pub struct Graph<'s, T: Float> {
    store: Option<&'s ParamStore<T>>,
    nodes: Vec<Node<'s, T>>,
    param_vars: Vec<Option<Var>>,
    grads: Vec<Option<Vec<T>>>,
    dropout: Option<(f64, ChaCha8Rng)>,
    track: bool,
}

impl<'s, T: Float> Graph<'s, T> {
    pub fn new(store: &'s ParamStore<T>) -> Self {
        Graph {
            store: Some(store),
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
            grads: Vec::new(),
            dropout: None,
            track: true,
        }
    }

    /// A graph without parameters (functional use, gradient checks).
    pub fn detached() -> Self {
        Graph {
            store: None,
            nodes: Vec::new(),
            param_vars: Vec::new(),
            grads: Vec::new(),
            dropout: None,
            track: true,
        }
    }

    /// Disables gradient bookkeeping; for inference.
    pub fn no_grad(mut self) -> Self {
        self.track = false;
        self
    }

    /// Enables inverted dropout with the given rate for [`Graph::dropout`].
    pub fn with_dropout(mut self, rate: f64, seed: u64) -> Self {
        if rate > 0.0 {
            self.dropout = Some((rate, ChaCha8Rng::seed_from_u64(seed)));
        }
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(data.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Owned(data),
            op,
            needs_grad: needs_grad && self.track,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        self.nodes[v.0].data()
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        assert_eq!(self.shape(v), (1, 1), "not a scalar");
        self.value(v)[0]
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<T>) -> Var {
        assert_eq!(data.len(), rows * cols, "constant size");
        self.push(rows, cols, data, Op::Leaf, false)
    }

    /// Input whose gradient is recorded (see [`Graph::grad`]).
    pub fn input(&mut self, rows: usize, cols: usize, data: Vec<T>) -> Var {
        assert_eq!(data.len(), rows * cols, "input size");
        self.push(rows, cols, data, Op::Leaf, true)
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let store = self.store.expect("graph has a parameter store");
        let t = store.get(id);
        let (rows, cols) = t.dims2();
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Borrowed(&t.data),
            op: Op::Param,
            needs_grad: t.requires_grad && self.track,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        v
    }

    /// `a (m×k) · b (k×n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_impl(a, b, false)
    }

    /// `a (m×k) · bᵀ` for `b (n×k)`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, transpose_b: bool) -> Var {
        let (m, k) = self.shape(a);
        let (br, bc) = self.shape(b);
        let n = if transpose_b {
            assert_eq!(bc, k, "matmul_t inner dimensions");
            br
        } else {
            assert_eq!(br, k, "matmul inner dimensions");
            bc
        };
        let mut out = vec![T::zero(); m * n];
        let lb = if transpose_b { Layout::Transposed } else { Layout::Normal };
        gemm(m, k, n, T::one(), self.value(a), Layout::Normal, self.value(b), lb, T::zero(), &mut out);
        let ng = self.needs(&[a, b]);
        self.push(m, n, out, Op::MatMul { a, b, transpose_b }, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shapes");
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x + *y).collect();
        let ng = self.needs(&[a, b]);
        self.push(r, c, out, Op::Add(a, b), ng)
    }

    /// Adds a 1×n row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "add_row shapes");
        let bias = self.value(row);
        let out = self
            .value(a)
            .chunks(c)
            .flat_map(|x| x.iter().zip(bias).map(|(x, b)| *x + *b))
            .collect();
        let ng = self.needs(&[a, row]);
        self.push(r, c, out, Op::AddRow(a, row), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shapes");
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x * *y).collect();
        let ng = self.needs(&[a, b]);
        self.push(r, c, out, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| *x * s).collect();
        let ng = self.needs(&[a]);
        self.push(r, c, out, Op::Scale(a, s), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| x.max(T::zero())).collect();
        let ng = self.needs(&[a]);
        self.push(r, c, out, Op::Relu(a), ng)
    }

    /// Softmax over each row of `a + mask`; `mask` is an additive r×c matrix
    /// where `-inf` removes a position.
    pub fn softmax(&mut self, a: Var, mask: Option<&[T]>) -> Var {
        let (r, c) = self.shape(a);
        if let Some(m) = mask {
            assert_eq!(m.len(), r * c, "mask shape");
        }
        let mut out = self.value(a).to_vec();
        if let Some(m) = mask {
            out.iter_mut().zip(m).for_each(|(x, m)| *x += *m);
        }
        for row in out.chunks_mut(c) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        let ng = self.needs(&[a]);
        self.push(r, c, out, Op::Softmax(a), ng)
    }

    /// Row-wise layer normalization with learned 1×n scale and shift.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(gamma), (1, c), "layer_norm gamma");
        assert_eq!(self.shape(beta), (1, c), "layer_norm beta");
        let eps = T::from_f64(LAYER_NORM_EPS);
        let n = T::from_f64(c as f64);
        let mut xhat = Vec::with_capacity(r * c);
        let mut rstd = Vec::with_capacity(r);
        for row in self.value(x).chunks(c) {
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
            let s = T::one() / (var + eps).sqrt();
            rstd.push(s);
            xhat.extend(row.iter().map(|v| (*v - mean) * s));
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        let out = xhat
            .chunks(c)
            .flat_map(|row| row.iter().zip(g).zip(b).map(|((h, g), b)| *h * *g + *b))
            .collect();
        let ng = self.needs(&[x, gamma, beta]);
        self.push(r, c, out, Op::LayerNorm { x, gamma, beta, xhat, rstd }, ng)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape(x);
        assert!(start + len <= c, "slice_cols out of range");
        let out = self
            .value(x)
            .chunks(c)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let ng = self.needs(&[x]);
        self.push(r, len, out, Op::SliceCols { x, start }, ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let r = self.shape(parts[0]).0;
        assert!(parts.iter().all(|p| self.shape(*p).0 == r), "concat_cols rows");
        let c: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for p in parts {
                let pc = self.shape(*p).1;
                out.extend_from_slice(&self.value(*p)[i * pc..(i + 1) * pc]);
            }
        }
        let ng = self.needs(parts);
        self.push(r, c, out, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let c = self.shape(parts[0]).1;
        assert!(parts.iter().all(|p| self.shape(*p).1 == c), "concat_rows cols");
        let r: usize = parts.iter().map(|p| self.shape(*p).0).sum();
        let mut out = Vec::with_capacity(r * c);
        for p in parts {
            out.extend_from_slice(self.value(*p));
        }
        let ng = self.needs(parts);
        self.push(r, c, out, Op::ConcatRows(parts.to_vec()), ng)
    }

    /// Rows of `table` selected by `ids` (embedding lookup).
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let (v, c) = self.shape(table);
        let t = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * c);
        for &i in ids {
            assert!(i < v, "gather index {i} out of range {v}");
            out.extend_from_slice(&t[i * c..(i + 1) * c]);
        }
        let ng = self.needs(&[table]);
        self.push(ids.len(), c, out, Op::Gather { table, ids: ids.to_vec() }, ng)
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, over rows where `mask` is true.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var, NnError> {
        let (r, c) = self.shape(logits);
        if targets.len() != r || mask.len() != r {
            return Err(NnError::ShapeMismatch(format!(
                "{r} logit rows, {} targets, {} mask entries",
                targets.len(),
                mask.len()
            )));
        }
        let count = mask.iter().filter(|m| **m).count();
        if count == 0 {
            return Err(NnError::EmptyMask);
        }
        let mut probs = Vec::with_capacity(r * c);
        let mut total = 0.0f64;
        let mut kept = Vec::with_capacity(r);
        for (i, row) in self.value(logits).chunks(c).enumerate() {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = row.iter().map(|x| (*x - max).exp()).sum();
            let log_z = max + sum.ln();
            probs.extend(row.iter().map(|x| (*x - log_z).exp()));
            if mask[i] {
                if targets[i] >= c {
                    return Err(NnError::ShapeMismatch(format!(
                        "target {} outside vocabulary of {c}",
                        targets[i]
                    )));
                }
                total += (log_z - row[targets[i]]).as_f64();
                kept.push(Some(targets[i]));
            } else {
                kept.push(None);
            }
        }
        let loss = T::from_f64(total / count as f64);
        let ng = self.needs(&[logits]);
        Ok(self.push(1, 1, vec![loss], Op::CrossEntropy { logits, targets: kept, probs, count }, ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        let ng = self.needs(&[a]);
        self.push(1, 1, vec![s], Op::Sum(a), ng)
    }

    /// Inverted dropout when enabled on this graph; identity otherwise.
    pub fn dropout(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let Some((rate, rng)) = self.dropout.as_mut() else {
            return x;
        };
        let rate = *rate;
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..r * c)
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let m = self.constant(r, c, mask);
        self.mul(x, m)
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&mut self, out: Var) {
        assert_eq!(self.shape(out), (1, 1), "backward needs a scalar output");
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[out.0] = Some(vec![T::one()]);
        for i in (0..=out.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            if self.nodes[i].needs_grad {
                backprop(&self.nodes, &mut self.grads, i, &g);
            }
            self.grads[i] = Some(g);
        }
    }

    /// Gradient of the last [`Graph::backward`] output with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradients per parameter, indexed like the store (`None` if unused).
    pub fn param_grads(&self) -> Vec<Option<Vec<T>>> {
        self.param_vars
            .iter()
            .map(|v| v.and_then(|v| self.grad(v).map(<[T]>::to_vec)))
            .collect()
    }
}

fn acc<'g, T: Float>(
    nodes: &[Node<'_, T>],
    grads: &'g mut [Option<Vec<T>>],
    v: Var,
) -> Option<&'g mut Vec<T>> {
    let n = &nodes[v.0];
    if !n.needs_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n.rows * n.cols]))
}

fn backprop<T: Float>(nodes: &[Node<'_, T>], grads: &mut [Option<Vec<T>>], i: usize, g: &[T]) {
    let node = &nodes[i];
    let (rows, cols) = (node.rows, node.cols);
    match &node.op {
        Op::Leaf | Op::Param => {}
        Op::MatMul { a, b, transpose_b } => {
            let (m, k) = (nodes[a.0].rows, nodes[a.0].cols);
            let n = cols;
            let av = nodes[a.0].data();
            let bv = nodes[b.0].data();
            if let Some(da) = acc(nodes, grads, *a) {
                // dA = G · op(B)ᵀ
                let lb = if *transpose_b { Layout::Normal } else { Layout::Transposed };
                gemm(m, n, k, T::one(), g, Layout::Normal, bv, lb, T::one(), da);
            }
            if let Some(db) = acc(nodes, grads, *b) {
                if *transpose_b {
                    // dB (n×k) = Gᵀ · A
                    gemm(n, m, k, T::one(), g, Layout::Transposed, av, Layout::Normal, T::one(), db);
                } else {
                    // dB (k×n) = Aᵀ · G
                    gemm(k, m, n, T::one(), av, Layout::Transposed, g, Layout::Normal, T::one(), db);
                }
            }
        }
        Op::Add(a, b) => {
            for v in [a, b] {
                if let Some(d) = acc(nodes, grads, *v) {
                    d.iter_mut().zip(g).for_each(|(d, g)| *d += *g);
                }
            }
        }
        Op::AddRow(a, row) => {
            if let Some(d) = acc(nodes, grads, *a) {
                d.iter_mut().zip(g).for_each(|(d, g)| *d += *g);
            }
            if let Some(d) = acc(nodes, grads, *row) {
                for gr in g.chunks(cols) {
                    d.iter_mut().zip(gr).for_each(|(d, g)| *d += *g);
                }
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (nodes[a.0].data(), nodes[b.0].data());
            if let Some(d) = acc(nodes, grads, *a) {
                for ((d, g), y) in d.iter_mut().zip(g).zip(bv) {
                    *d += *g * *y;
                }
            }
            if let Some(d) = acc(nodes, grads, *b) {
                for ((d, g), x) in d.iter_mut().zip(g).zip(av) {
                    *d += *g * *x;
                }
            }
        }
        Op::Scale(a, s) => {
            if let Some(d) = acc(nodes, grads, *a) {
                d.iter_mut().zip(g).for_each(|(d, g)| *d += *g * *s);
            }
        }
        Op::Relu(a) => {
            let y = node.data();
            if let Some(d) = acc(nodes, grads, *a) {
                for ((d, g), y) in d.iter_mut().zip(g).zip(y) {
                    if *y > T::zero() {
                        *d += *g;
                    }
                }
            }
        }
        Op::Softmax(a) => {
            let y = node.data();
            if let Some(d) = acc(nodes, grads, *a) {
                for ((dr, gr), yr) in d.chunks_mut(cols).zip(g.chunks(cols)).zip(y.chunks(cols)) {
                    let dot: T = gr.iter().zip(yr).map(|(g, y)| *g * *y).sum();
                    for ((d, g), y) in dr.iter_mut().zip(gr).zip(yr) {
                        *d += *y * (*g - dot);
                    }
                }
            }
        }
        Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
            let gv = nodes[gamma.0].data();
            if let Some(d) = acc(nodes, grads, *gamma) {
                for (gr, hr) in g.chunks(cols).zip(xhat.chunks(cols)) {
                    for ((d, g), h) in d.iter_mut().zip(gr).zip(hr) {
                        *d += *g * *h;
                    }
                }
            }
            if let Some(d) = acc(nodes, grads, *beta) {
                for gr in g.chunks(cols) {
                    d.iter_mut().zip(gr).for_each(|(d, g)| *d += *g);
                }
            }
            if let Some(d) = acc(nodes, grads, *x) {
                let n = T::from_f64(cols as f64);
                for (r, dr) in d.chunks_mut(cols).enumerate() {
                    let gr = &g[r * cols..(r + 1) * cols];
                    let hr = &xhat[r * cols..(r + 1) * cols];
                    let dh: Vec<T> = gr.iter().zip(gv).map(|(g, w)| *g * *w).collect();
                    let sum_dh: T = dh.iter().copied().sum();
                    let sum_dh_h: T = dh.iter().zip(hr).map(|(a, b)| *a * *b).sum();
                    let scale = rstd[r] / n;
                    for ((d, dh), h) in dr.iter_mut().zip(&dh).zip(hr) {
                        *d += scale * (n * *dh - sum_dh - *h * sum_dh_h);
                    }
                }
            }
        }
        Op::SliceCols { x, start } => {
            let src_cols = nodes[x.0].cols;
            if let Some(d) = acc(nodes, grads, *x) {
                for (dr, gr) in d.chunks_mut(src_cols).zip(g.chunks(cols)) {
                    dr[*start..*start + cols].iter_mut().zip(gr).for_each(|(d, g)| *d += *g);
                }
            }
        }
        Op::ConcatCols(parts) => {
            let mut offset = 0;
            for p in parts {
                let pc = nodes[p.0].cols;
                if let Some(d) = acc(nodes, grads, *p) {
                    for (dr, gr) in d.chunks_mut(pc).zip(g.chunks(cols)) {
                        dr.iter_mut().zip(&gr[offset..offset + pc]).for_each(|(d, g)| *d += *g);
                    }
                }
                offset += pc;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for p in parts {
                let len = nodes[p.0].rows * cols;
                if let Some(d) = acc(nodes, grads, *p) {
                    d.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, g)| *d += *g);
                }
                offset += len;
            }
        }
        Op::Gather { table, ids } => {
            if let Some(d) = acc(nodes, grads, *table) {
                for (r, &id) in ids.iter().enumerate() {
                    let gr = &g[r * cols..(r + 1) * cols];
                    d[id * cols..(id + 1) * cols].iter_mut().zip(gr).for_each(|(d, g)| *d += *g);
                }
            }
        }
        Op::CrossEntropy { logits, targets, probs, count } => {
            let c = nodes[logits.0].cols;
            let scale = g[0] / T::from_f64(*count as f64);
            if let Some(d) = acc(nodes, grads, *logits) {
                for (r, t) in targets.iter().enumerate() {
                    let Some(t) = t else { continue };
                    let dr = &mut d[r * c..(r + 1) * c];
                    for (j, (d, p)) in dr.iter_mut().zip(&probs[r * c..(r + 1) * c]).enumerate() {
                        let onehot = if j == *t { T::one() } else { T::zero() };
                        *d += (*p - onehot) * scale;
                    }
                }
            }
        }
        Op::Sum(a) => {
            if let Some(d) = acc(nodes, grads, *a) {
                d.iter_mut().for_each(|d| *d += g[0]);
            }
        }
    }
    let _ = rows;
}
