//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters are
//! pulled in from a [`ParamStore`] on first use; [`Graph::backward`] returns
//! gradients aligned with the store.

use std::borrow::Cow;
use std::collections::HashMap;

use super::crf;
use super::tensor::Tensor;

pub type NodeId = usize;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(t);
        id
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|i| &self.tensors[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.id(name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

/// Gradients aligned with a [`ParamStore`]; unused parameters get zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            tensors: store.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::sum_sq).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }
}

enum Op {
    Constant,
    Param(usize),
    Gather { table: NodeId, ids: Vec<usize> },
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    Scale(NodeId, f64),
    Gelu(NodeId),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Vec<f64>, rstd: Vec<f64> },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    SliceCols { a: NodeId, start: usize },
    SliceRows { a: NodeId, start: usize },
    ConcatCols(Vec<NodeId>),
    Nll { logp: NodeId, targets: Vec<usize> },
    Crf { emissions: NodeId, transitions: NodeId, d_emissions: Tensor, d_transitions: Tensor },
    WeightedSum(Vec<(NodeId, f64)>),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    grad: bool,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node<'p>>,
    param_nodes: Vec<Option<NodeId>>,
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    assert_eq!(k, b.rows(), "matmul inner dims");
    let mut out = vec![0.0; n * m];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = ad[i * k + p];
            if x == 0.0 {
                continue;
            }
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &y) in orow.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    Tensor::matrix(n, m, out)
}

/// a · bᵀ
fn matmul_t(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows(), a.cols(), b.rows());
    assert_eq!(k, b.cols(), "matmul_t inner dims");
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let ar = a.row(i);
        for j in 0..m {
            out[i * m + j] = ar.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    }
    Tensor::matrix(n, m, out)
}

/// aᵀ · b
fn t_matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.cols(), a.rows(), b.cols());
    assert_eq!(k, b.rows(), "t_matmul inner dims");
    let mut out = vec![0.0; n * m];
    for p in 0..k {
        let ar = a.row(p);
        let br = b.row(p);
        for (i, &x) in ar.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, &y) in orow.iter_mut().zip(br) {
                *o += x * y;
            }
        }
    }
    Tensor::matrix(n, m, out)
}

fn as_matrix(t: &Tensor) -> Tensor {
    Tensor::matrix(t.rows(), t.cols(), t.data().to_vec())
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = if x == f64::NEG_INFINITY { 0.0 } else { (x - m).exp() };
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, grad: bool) -> NodeId {
        self.nodes.push(Node { value: Cow::Owned(value), op, grad });
        self.nodes.len() - 1
    }

    fn g(&self, id: NodeId) -> bool {
        self.nodes[id].grad
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let t = as_matrix(&t);
        self.push(t, Op::Constant, false)
    }

    pub fn param(&mut self, id: usize) -> NodeId {
        if let Some(n) = self.param_nodes[id] {
            return n;
        }
        let t = self.store.get(id);
        let value = if t.shape().len() == 2 { Cow::Borrowed(t) } else { Cow::Owned(as_matrix(t)) };
        self.nodes.push(Node { value, op: Op::Param(id), grad: true });
        let n = self.nodes.len() - 1;
        self.param_nodes[id] = Some(n);
        n
    }

    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = &self.nodes[table].value;
        let c = t.cols();
        let mut data = Vec::with_capacity(ids.len() * c);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let v = Tensor::matrix(ids.len(), c, data);
        let g = self.g(table);
        self.push(v, Op::Gather { table, ids: ids.to_vec() }, g)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.nodes[a].value.as_ref().clone();
        v.add_assign(&self.nodes[b].value);
        let g = self.g(a) || self.g(b);
        self.push(v, Op::Add(a, b), g)
    }

    /// `a` (n×c) plus the row vector `b` (1×c) on every row.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.nodes[a].value.as_ref().clone();
        let bias = self.nodes[b].value.data().to_vec();
        for r in 0..v.rows() {
            for (x, y) in v.row_mut(r).iter_mut().zip(&bias) {
                *x += y;
            }
        }
        let g = self.g(a) || self.g(b);
        self.push(v, Op::AddRow(a, b), g)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul(&self.nodes[a].value, &self.nodes[b].value);
        let g = self.g(a) || self.g(b);
        self.push(v, Op::MatMul(a, b), g)
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul_t(&self.nodes[a].value, &self.nodes[b].value);
        let g = self.g(a) || self.g(b);
        self.push(v, Op::MatMulT(a, b), g)
    }

    /// `x · w + b` with `w` (in×out) and `b` (1×out).
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let h = self.matmul(x, w);
        self.add_row(h, b)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let mut v = self.nodes[a].value.as_ref().clone();
        v.scale(s);
        let g = self.g(a);
        self.push(v, Op::Scale(a, s), g)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let data = x
            .data()
            .iter()
            .map(|&v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()))
            .collect();
        let v = Tensor::matrix(x.rows(), x.cols(), data);
        let g = self.g(a);
        self.push(v, Op::Gelu(a), g)
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let (n, c) = (xv.rows(), xv.cols());
        let gv = self.nodes[gamma].value.data();
        let bv = self.nodes[beta].value.data();
        let mut out = vec![0.0; n * c];
        let mut xhat = vec![0.0; n * c];
        let mut rstd = vec![0.0; n];
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[r * c + j] = h;
                out[r * c + j] = gv[j] * h + bv[j];
            }
        }
        let g = self.g(x) || self.g(gamma) || self.g(beta);
        self.push(
            Tensor::matrix(n, c, out),
            Op::LayerNorm { x, gamma, beta, xhat, rstd },
            g,
        )
    }

    /// Row softmax; `-inf` entries get probability zero.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let mut v = Tensor::zeros(&[x.rows(), x.cols()]);
        for r in 0..x.rows() {
            softmax_row(x.row(r), v.row_mut(r));
        }
        let g = self.g(a);
        self.push(v, Op::Softmax(a), g)
    }

    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let mut v = x.as_ref().clone();
        for r in 0..x.rows() {
            let lse = log_sum_exp(x.row(r));
            v.row_mut(r).iter_mut().for_each(|e| *e -= lse);
        }
        let g = self.g(a);
        self.push(v, Op::LogSoftmax(a), g)
    }

    /// Sets entries above the diagonal to `-inf` (constant mask, no gradient
    /// flows into masked entries).
    pub fn causal_mask(&mut self, a: NodeId) -> NodeId {
        let mut mask = Tensor::zeros(&[self.nodes[a].value.rows(), self.nodes[a].value.cols()]);
        for r in 0..mask.rows() {
            for c in (r + 1)..mask.cols() {
                mask.set(r, c, f64::NEG_INFINITY);
            }
        }
        let m = self.constant(mask);
        self.add(a, m)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let x = &self.nodes[a].value;
        let mut data = Vec::with_capacity(x.rows() * len);
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row(r)[start..start + len]);
        }
        let v = Tensor::matrix(x.rows(), len, data);
        let g = self.g(a);
        self.push(v, Op::SliceCols { a, start }, g)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let x = &self.nodes[a].value;
        let c = x.cols();
        let v = Tensor::matrix(len, c, x.data()[start * c..(start + len) * c].to_vec());
        let g = self.g(a);
        self.push(v, Op::SliceRows { a, start }, g)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.nodes[parts[0]].value.rows();
        let width: usize = parts.iter().map(|&p| self.nodes[p].value.cols()).sum();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                let t = &self.nodes[p].value;
                assert_eq!(t.rows(), rows, "concat_cols row mismatch");
                data.extend_from_slice(t.row(r));
            }
        }
        let g = parts.iter().any(|&p| self.g(p));
        self.push(Tensor::matrix(rows, width, data), Op::ConcatCols(parts.to_vec()), g)
    }

    /// Σ_t −logp[t, targets[t]] as a 1×1 node.
    pub fn nll(&mut self, logp: NodeId, targets: &[usize]) -> NodeId {
        let x = &self.nodes[logp].value;
        assert_eq!(x.rows(), targets.len(), "nll target count");
        let s: f64 = targets.iter().enumerate().map(|(t, &y)| -x.at(t, y)).sum();
        let g = self.g(logp);
        self.push(Tensor::scalar(s), Op::Nll { logp, targets: targets.to_vec() }, g)
    }

    /// Linear-chain CRF negative log-likelihood of `tags`.
    pub fn crf_nll(&mut self, emissions: NodeId, transitions: NodeId, tags: &[usize]) -> NodeId {
        let e = &self.nodes[emissions].value;
        let m = &self.nodes[transitions].value;
        let (nll, d_emissions, d_transitions) = crf::nll_with_gradients(m, e, tags);
        let g = self.g(emissions) || self.g(transitions);
        self.push(
            Tensor::scalar(nll),
            Op::Crf { emissions, transitions, d_emissions, d_transitions },
            g,
        )
    }

    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        let s = terms.iter().map(|&(n, w)| w * self.nodes[n].value.data()[0]).sum();
        let g = terms.iter().any(|&(n, _)| self.g(n));
        self.push(Tensor::scalar(s), Op::WeightedSum(terms.to_vec()), g)
    }

    /// Back-propagates from the scalar `root`.
    pub fn backward(&self, root: NodeId) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::zeros_like(self.store);

        fn acc(grads: &mut [Option<Tensor>], id: NodeId, t: Tensor) {
            match &mut grads[id] {
                Some(g) => g.add_assign(&t),
                slot => *slot = Some(t),
            }
        }

        for id in (0..=root).rev() {
            let Some(dy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.grad {
                continue;
            }
            let val = |n: NodeId| &self.nodes[n].value;
            let want = |n: NodeId| self.nodes[n].grad;
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => {
                    out.tensors[*p].data_mut().iter_mut().zip(dy.data()).for_each(|(a, b)| *a += b);
                }
                Op::Gather { table, ids } => {
                    let t = val(*table);
                    let mut d = Tensor::zeros(&[t.rows(), t.cols()]);
                    for (r, &i) in ids.iter().enumerate() {
                        for (x, y) in d.row_mut(i).iter_mut().zip(dy.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *table, d);
                }
                Op::Add(a, b) => {
                    if want(*a) {
                        acc(&mut grads, *a, dy.clone());
                    }
                    if want(*b) {
                        acc(&mut grads, *b, dy);
                    }
                }
                Op::AddRow(a, b) => {
                    if want(*b) {
                        let mut d = vec![0.0; dy.cols()];
                        for r in 0..dy.rows() {
                            for (x, y) in d.iter_mut().zip(dy.row(r)) {
                                *x += y;
                            }
                        }
                        acc(&mut grads, *b, Tensor::matrix(1, d.len(), d));
                    }
                    if want(*a) {
                        acc(&mut grads, *a, dy);
                    }
                }
                Op::MatMul(a, b) => {
                    if want(*a) {
                        acc(&mut grads, *a, matmul_t(&dy, val(*b)));
                    }
                    if want(*b) {
                        acc(&mut grads, *b, t_matmul(val(*a), &dy));
                    }
                }
                Op::MatMulT(a, b) => {
                    if want(*a) {
                        acc(&mut grads, *a, matmul(&dy, val(*b)));
                    }
                    if want(*b) {
                        acc(&mut grads, *b, t_matmul(&dy, val(*a)));
                    }
                }
                Op::Scale(a, s) => {
                    let mut d = dy;
                    d.scale(*s);
                    acc(&mut grads, *a, d);
                }
                Op::Gelu(a) => {
                    let x = val(*a);
                    let data = x
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&v, &g)| {
                            let u = GELU_C * (v + 0.044715 * v * v * v);
                            let th = u.tanh();
                            let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
                            g * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du)
                        })
                        .collect();
                    acc(&mut grads, *a, Tensor::matrix(x.rows(), x.cols(), data));
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let (n, c) = (dy.rows(), dy.cols());
                    let gv = val(*gamma).data();
                    if want(*gamma) || want(*beta) {
                        let mut dg = vec![0.0; c];
                        let mut db = vec![0.0; c];
                        for r in 0..n {
                            for j in 0..c {
                                dg[j] += dy.at(r, j) * xhat[r * c + j];
                                db[j] += dy.at(r, j);
                            }
                        }
                        if want(*gamma) {
                            acc(&mut grads, *gamma, Tensor::matrix(1, c, dg));
                        }
                        if want(*beta) {
                            acc(&mut grads, *beta, Tensor::matrix(1, c, db));
                        }
                    }
                    if want(*x) {
                        let mut dx = vec![0.0; n * c];
                        for r in 0..n {
                            let mut m1 = 0.0;
                            let mut m2 = 0.0;
                            for j in 0..c {
                                let dh = dy.at(r, j) * gv[j];
                                m1 += dh;
                                m2 += dh * xhat[r * c + j];
                            }
                            m1 /= c as f64;
                            m2 /= c as f64;
                            for j in 0..c {
                                let dh = dy.at(r, j) * gv[j];
                                dx[r * c + j] = rstd[r] * (dh - m1 - xhat[r * c + j] * m2);
                            }
                        }
                        acc(&mut grads, *x, Tensor::matrix(n, c, dx));
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut d = Tensor::zeros(&[y.rows(), y.cols()]);
                    for r in 0..y.rows() {
                        let dot: f64 = y.row(r).iter().zip(dy.row(r)).map(|(p, g)| p * g).sum();
                        for ((o, &p), &g) in d.row_mut(r).iter_mut().zip(y.row(r)).zip(dy.row(r)) {
                            *o = p * (g - dot);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::LogSoftmax(a) => {
                    let y = &node.value;
                    let mut d = Tensor::zeros(&[y.rows(), y.cols()]);
                    for r in 0..y.rows() {
                        let s: f64 = dy.row(r).iter().sum();
                        for ((o, &lp), &g) in d.row_mut(r).iter_mut().zip(y.row(r)).zip(dy.row(r)) {
                            *o = g - lp.exp() * s;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SliceCols { a, start } => {
                    let x = val(*a);
                    let mut d = Tensor::zeros(&[x.rows(), x.cols()]);
                    let len = dy.cols();
                    for r in 0..x.rows() {
                        d.row_mut(r)[*start..*start + len].copy_from_slice(dy.row(r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SliceRows { a, start } => {
                    let x = val(*a);
                    let mut d = Tensor::zeros(&[x.rows(), x.cols()]);
                    let c = x.cols();
                    d.data_mut()[*start * c..*start * c + dy.numel()].copy_from_slice(dy.data());
                    acc(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        if want(p) {
                            let mut data = Vec::with_capacity(dy.rows() * w);
                            for r in 0..dy.rows() {
                                data.extend_from_slice(&dy.row(r)[off..off + w]);
                            }
                            acc(&mut grads, p, Tensor::matrix(dy.rows(), w, data));
                        }
                        off += w;
                    }
                }
                Op::Nll { logp, targets } => {
                    let x = val(*logp);
                    let g = dy.data()[0];
                    let mut d = Tensor::zeros(&[x.rows(), x.cols()]);
                    for (t, &y) in targets.iter().enumerate() {
                        d.set(t, y, -g);
                    }
                    acc(&mut grads, *logp, d);
                }
                Op::Crf { emissions, transitions, d_emissions, d_transitions } => {
                    let g = dy.data()[0];
                    if want(*emissions) {
                        let mut d = d_emissions.clone();
                        d.scale(g);
                        acc(&mut grads, *emissions, d);
                    }
                    if want(*transitions) {
                        let mut d = d_transitions.clone();
                        d.scale(g);
                        acc(&mut grads, *transitions, d);
                    }
                }
                Op::WeightedSum(terms) => {
                    let g = dy.data()[0];
                    for &(n, w) in terms {
                        if want(n) {
                            acc(&mut grads, n, Tensor::scalar(g * w));
                        }
                    }
                }
            }
        }
        out
    }
}
