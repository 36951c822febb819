//! Encoder input: word embedding + positional encoding + semantic features.

use super::autodiff::{Graph, NodeId};
use super::state::ModelState;
use super::tensor::Tensor;
use crate::config::FusionMode;
use crate::error::{contract, Error, Result};
use crate::tagger::SemanticFeatureSeq;

/// `(d_p, d_c, pad)` for concatenation mode: each of the `k + 1` feature
/// slices gets `floor(d / (k + 1))` dims and the remainder is zero padding.
pub fn feature_dims(d_model: usize, class_levels: usize) -> Result<(usize, usize, usize)> {
    let parts = class_levels + 1;
    if d_model < parts {
        return Err(Error::Config(format!(
            "d_model {d_model} cannot hold {parts} feature slices"
        )));
    }
    let w = d_model / parts;
    Ok((w, w, d_model - parts * w))
}

/// Sinusoidal position table, `n × d`.
pub fn positional_encoding(n: usize, d: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n, d]);
    for p in 0..n {
        write_position(p, t.row_mut(p));
    }
    t
}

pub(crate) fn write_position(pos: usize, row: &mut [f64]) {
    let d = row.len();
    for (i, v) in row.iter_mut().enumerate() {
        let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let a = pos as f64 / rate;
        *v = if i % 2 == 0 { a.sin() } else { a.cos() };
    }
}

pub(crate) fn fuse_graph(
    g: &mut Graph,
    state: &ModelState,
    char_ids: &[usize],
    features: &SemanticFeatureSeq,
) -> Result<NodeId> {
    let n = char_ids.len();
    state.check_features(n, features)?;
    let v = state.vocab.len();
    contract!(char_ids.iter().all(|&c| c < v), "character id out of range");
    let d = state.d_model();
    let word_table = g.param(state.ids.word);
    let word = g.gather(word_table, char_ids);
    let pe = g.constant(positional_encoding(n, d));
    let mut x = g.add(word, pe);

    let pos_table = g.param(state.ids.pos);
    let mut parts = vec![g.gather(pos_table, &features.pos)];
    for (l, &table) in state.ids.classes.iter().enumerate() {
        let t = g.param(table);
        parts.push(g.gather(t, &features.level(l)));
    }
    match state.config.fusion_mode {
        FusionMode::Concatenate => {
            let (_, _, pad) = feature_dims(d, state.ids.classes.len())?;
            if pad > 0 {
                parts.push(g.constant(Tensor::zeros(&[n, pad])));
            }
            let sem = g.concat_cols(&parts);
            x = g.add(x, sem);
        }
        FusionMode::Accumulate => {
            for p in parts {
                x = g.add(x, p);
            }
        }
    }
    Ok(x)
}

/// Fused encoder input (`n × d_model`) for one sentence.
pub fn fuse_embeddings(
    state: &ModelState,
    char_ids: &[usize],
    features: &SemanticFeatureSeq,
) -> Result<Tensor> {
    let mut g = Graph::new(&state.params);
    let x = fuse_graph(&mut g, state, char_ids, features)?;
    Ok(g.value(x).clone())
}
