//! Pre-norm transformer encoder and decoder, as a differentiable graph for
//! training and as an incremental cached decoder for inference.

use super::autodiff::{matmul, Graph, NodeId};
use super::fusion::{fuse_graph, positional_encoding, write_position};
use super::state::{Attn, Lin, ModelState, Norm};
use super::tensor::Tensor;
use crate::error::{contract, Result};
use crate::tagger::SemanticFeatureSeq;
use crate::vocab::BOS_ID;

const LN_EPS: f64 = 1e-5;

fn lin(g: &mut Graph, x: NodeId, l: Lin) -> NodeId {
    let w = g.param(l.w);
    let b = g.param(l.b);
    g.linear(x, w, b)
}

fn norm(g: &mut Graph, x: NodeId, n: Norm) -> NodeId {
    let gamma = g.param(n.g);
    let beta = g.param(n.b);
    g.layer_norm(x, gamma, beta)
}

fn attention(g: &mut Graph, q_in: NodeId, kv_in: NodeId, a: &Attn, heads: usize, causal: bool) -> NodeId {
    let q = lin(g, q_in, a.q);
    let k = lin(g, kv_in, a.k);
    let v = lin(g, kv_in, a.v);
    let d = g.value(q).cols();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (g.slice_cols(q, h * dh, dh), g.slice_cols(k, h * dh, dh), g.slice_cols(v, h * dh, dh))
        };
        let s = g.matmul_t(qh, kh);
        let mut s = g.scale(s, scale);
        if causal {
            s = g.causal_mask(s);
        }
        let p = g.softmax(s);
        outs.push(g.matmul(p, vh));
    }
    let o = if heads == 1 { outs[0] } else { g.concat_cols(&outs) };
    lin(g, o, a.o)
}

fn feed_forward(g: &mut Graph, x: NodeId, ff1: Lin, ff2: Lin) -> NodeId {
    let h = lin(g, x, ff1);
    let h = g.gelu(h);
    lin(g, h, ff2)
}

pub(crate) fn encode_graph(g: &mut Graph, state: &ModelState, mut x: NodeId) -> NodeId {
    let heads = state.config.heads;
    for layer in &state.ids.enc {
        let h = norm(g, x, layer.ln1);
        let a = attention(g, h, h, &layer.attn, heads, false);
        x = g.add(x, a);
        let h = norm(g, x, layer.ln2);
        let f = feed_forward(g, h, layer.ff1, layer.ff2);
        x = g.add(x, f);
    }
    match state.ids.enc_ln {
        Some(n) => norm(g, x, n),
        None => x,
    }
}

/// Decoder outputs for every prefix position: token logits and, if the model
/// has one, auxiliary-head logits.
pub(crate) fn decode_graph(
    g: &mut Graph,
    state: &ModelState,
    tgt_in: &[usize],
    h_src: NodeId,
) -> (NodeId, Option<NodeId>) {
    let d = state.d_model();
    let heads = state.config.heads;
    let table = g.param(state.ids.word);
    let emb = g.gather(table, tgt_in);
    let pe = g.constant(positional_encoding(tgt_in.len(), d));
    let mut x = g.add(emb, pe);
    for layer in &state.ids.dec {
        let h = norm(g, x, layer.ln1);
        let a = attention(g, h, h, &layer.self_attn, heads, true);
        x = g.add(x, a);
        let h = norm(g, x, layer.ln2);
        let c = attention(g, h, h_src, &layer.cross, heads, false);
        x = g.add(x, c);
        let h = norm(g, x, layer.ln3);
        let f = feed_forward(g, h, layer.ff1, layer.ff2);
        x = g.add(x, f);
    }
    if let Some(n) = state.ids.dec_ln {
        x = norm(g, x, n);
    }
    let tok = lin(g, x, state.ids.token_head);
    let aux = state.ids.aux_head.map(|l| lin(g, x, l));
    (tok, aux)
}

/// Full training-time forward pass on one pair.
pub(crate) fn forward_graph(
    g: &mut Graph,
    state: &ModelState,
    src: &[usize],
    features: &SemanticFeatureSeq,
    tgt_in: &[usize],
) -> Result<(NodeId, Option<NodeId>)> {
    contract!(!src.is_empty(), "empty source sequence");
    contract!(tgt_in.first() == Some(&BOS_ID), "decoder input must start with BOS");
    let x = fuse_graph(g, state, src, features)?;
    let h = encode_graph(g, state, x);
    Ok(decode_graph(g, state, tgt_in, h))
}

/// Runs the encoder stack on an already fused input.
pub fn encode(state: &ModelState, fused: &Tensor) -> Result<Tensor> {
    contract!(
        fused.shape().len() == 2 && fused.cols() == state.d_model(),
        "fused input {:?} does not have {} columns",
        fused.shape(),
        state.d_model()
    );
    let mut g = Graph::new(&state.params);
    let x = g.constant(fused.clone());
    let h = encode_graph(&mut g, state, x);
    Ok(g.value(h).clone())
}

/// Fuses features and encodes one source sentence.
pub fn encode_source(state: &ModelState, src: &[usize], features: &SemanticFeatureSeq) -> Result<Tensor> {
    contract!(!src.is_empty(), "empty source sequence");
    let mut g = Graph::new(&state.params);
    let x = fuse_graph(&mut g, state, src, features)?;
    let h = encode_graph(&mut g, state, x);
    Ok(g.value(h).clone())
}

/// Logits of one decoder step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLogits {
    pub token: Vec<f64>,
    pub aux: Option<Vec<f64>>,
}

/// Cross-attention keys and values of an encoded source, per decoder layer.
#[derive(Clone, Debug)]
pub struct SourceMemory {
    layers: Vec<(Tensor, Tensor)>,
}

/// Self-attention keys and values of the tokens decoded so far.
#[derive(Clone, Debug)]
pub struct DecoderCache {
    len: usize,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl DecoderCache {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn add_bias(mut t: Tensor, b: &Tensor) -> Tensor {
    for r in 0..t.rows() {
        for (x, y) in t.row_mut(r).iter_mut().zip(b.data()) {
            *x += y;
        }
    }
    t
}

fn row_linear(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let mut out = b.data().to_vec();
    for (p, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(w.row(p)) {
            *o += xv * wv;
        }
    }
    out
}

fn row_norm(x: &[f64], g: &Tensor, b: &Tensor) -> Vec<f64> {
    let c = x.len() as f64;
    let mean = x.iter().sum::<f64>() / c;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c;
    let rs = 1.0 / (var + LN_EPS).sqrt();
    x.iter()
        .zip(g.data())
        .zip(b.data())
        .map(|((v, gv), bv)| gv * (v - mean) * rs + bv)
        .collect()
}

fn gelu(v: f64) -> f64 {
    0.5 * v * (1.0 + (0.797_884_560_802_865_4 * (v + 0.044715 * v * v * v)).tanh())
}

/// One query row against `t` cached key/value rows (flattened `t × d`).
fn attend(q: &[f64], keys: &[f64], values: &[f64], heads: usize) -> Vec<f64> {
    let d = q.len();
    let t = keys.len() / d;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; d];
    let mut scores = vec![0.0; t];
    for h in 0..heads {
        let qh = &q[h * dh..(h + 1) * dh];
        for (j, s) in scores.iter_mut().enumerate() {
            let kh = &keys[j * d + h * dh..j * d + (h + 1) * dh];
            *s = qh.iter().zip(kh).map(|(a, b)| a * b).sum::<f64>() * scale;
        }
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - m).exp();
            z += *s;
        }
        for (j, s) in scores.iter().enumerate() {
            let p = s / z;
            let vh = &values[j * d + h * dh..j * d + (h + 1) * dh];
            for (o, v) in out[h * dh..(h + 1) * dh].iter_mut().zip(vh) {
                *o += p * v;
            }
        }
    }
    out
}

impl ModelState {
    fn p(&self, id: usize) -> &Tensor {
        self.params.get(id)
    }

    pub fn source_memory(&self, h_src: &Tensor) -> Result<SourceMemory> {
        contract!(
            h_src.shape().len() == 2 && h_src.rows() >= 1 && h_src.cols() == self.d_model(),
            "encoded source {:?} has the wrong shape",
            h_src.shape()
        );
        let layers = self
            .ids
            .dec
            .iter()
            .map(|l| {
                let k = add_bias(matmul(h_src, self.p(l.cross.k.w)), self.p(l.cross.k.b));
                let v = add_bias(matmul(h_src, self.p(l.cross.v.w)), self.p(l.cross.v.b));
                (k, v)
            })
            .collect();
        Ok(SourceMemory { layers })
    }

    pub fn new_cache(&self) -> DecoderCache {
        let n = self.ids.dec.len();
        DecoderCache {
            len: 0,
            keys: vec![Vec::new(); n],
            values: vec![Vec::new(); n],
        }
    }

    /// Feeds `token` at the next position and returns that position's logits.
    pub fn step(&self, mem: &SourceMemory, cache: &mut DecoderCache, token: usize) -> Result<StepLogits> {
        contract!(token < self.vocab.len(), "token id {token} out of range");
        let d = self.d_model();
        let heads = self.config.heads;
        let mut x = vec![0.0; d];
        write_position(cache.len, &mut x);
        for (v, e) in x.iter_mut().zip(self.word_table().row(token)) {
            *v += e;
        }
        for (i, l) in self.ids.dec.iter().enumerate() {
            let h = row_norm(&x, self.p(l.ln1.g), self.p(l.ln1.b));
            let q = row_linear(&h, self.p(l.self_attn.q.w), self.p(l.self_attn.q.b));
            let k = row_linear(&h, self.p(l.self_attn.k.w), self.p(l.self_attn.k.b));
            let v = row_linear(&h, self.p(l.self_attn.v.w), self.p(l.self_attn.v.b));
            cache.keys[i].extend_from_slice(&k);
            cache.values[i].extend_from_slice(&v);
            let a = attend(&q, &cache.keys[i], &cache.values[i], heads);
            let a = row_linear(&a, self.p(l.self_attn.o.w), self.p(l.self_attn.o.b));
            x.iter_mut().zip(&a).for_each(|(x, a)| *x += a);

            let h = row_norm(&x, self.p(l.ln2.g), self.p(l.ln2.b));
            let q = row_linear(&h, self.p(l.cross.q.w), self.p(l.cross.q.b));
            let (mk, mv) = &mem.layers[i];
            let c = attend(&q, mk.data(), mv.data(), heads);
            let c = row_linear(&c, self.p(l.cross.o.w), self.p(l.cross.o.b));
            x.iter_mut().zip(&c).for_each(|(x, c)| *x += c);

            let h = row_norm(&x, self.p(l.ln3.g), self.p(l.ln3.b));
            let f: Vec<f64> = row_linear(&h, self.p(l.ff1.w), self.p(l.ff1.b))
                .into_iter()
                .map(gelu)
                .collect();
            let f = row_linear(&f, self.p(l.ff2.w), self.p(l.ff2.b));
            x.iter_mut().zip(&f).for_each(|(x, f)| *x += f);
        }
        cache.len += 1;
        if let Some(n) = self.ids.dec_ln {
            x = row_norm(&x, self.p(n.g), self.p(n.b));
        }
        let t = self.ids.token_head;
        Ok(StepLogits {
            token: row_linear(&x, self.p(t.w), self.p(t.b)),
            aux: self.ids.aux_head.map(|a| row_linear(&x, self.p(a.w), self.p(a.b))),
        })
    }
}

/// Logits for the position after `prefix`, which must start with BOS.
pub fn decode_step(state: &ModelState, prefix: &[usize], h_src: &Tensor) -> Result<StepLogits> {
    contract!(!prefix.is_empty(), "empty decoder prefix");
    contract!(prefix[0] == BOS_ID, "decoder prefix must start with BOS");
    let mem = state.source_memory(h_src)?;
    let mut cache = state.new_cache();
    let mut last = None;
    for &t in prefix {
        last = Some(state.step(&mem, &mut cache, t)?);
    }
    Ok(last.expect("non-empty prefix"))
}
