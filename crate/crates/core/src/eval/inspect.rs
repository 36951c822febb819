//! Diagnostics read off a trained model: nearest word embeddings of each POS
//! embedding, and the CRF transition matrix.

use std::fmt::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelState, Tensor};
use crate::vocab::Token;

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosNeighbors {
    pub tag: String,
    pub neighbors: Vec<(char, f64)>,
}

/// For each POS tag, the `top_n` characters whose word embeddings are most
/// cosine-similar to the tag's embedding (zero-padded to the model width).
pub fn pos_embedding_neighbors(state: &ModelState, top_n: usize) -> Vec<PosNeighbors> {
    let d = state.d_model();
    let words = state.word_table();
    let pos = state.pos_table();
    let mut out = Vec::new();
    for (t, name) in state.tagset.names().iter().enumerate() {
        let mut q = pos.row(t).to_vec();
        q.resize(d, 0.0);
        let mut scored = Vec::new();
        if q.iter().all(|&x| x == 0.0) {
            log::warn!("POS tag {name} has a zero embedding; skipped");
        } else {
            for id in 0..words.rows() {
                let Some(Token::Char(c)) = state.vocab.token(id) else { continue };
                match cosine(&q, words.row(id)) {
                    Some(s) => scored.push((c, s)),
                    None => log::warn!("character {c} has a zero embedding; skipped"),
                }
            }
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_n);
        out.push(PosNeighbors {
            tag: name.clone(),
            neighbors: scored,
        });
    }
    out
}

/// The transition matrix with its labels and row-softmax probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionExport {
    pub labels: Vec<String>,
    pub raw: Tensor,
    pub probs: Tensor,
}

pub fn export_transition_matrix(state: &ModelState) -> Result<TransitionExport> {
    let m = state
        .transitions()
        .ok_or_else(|| Error::Config("model has no CRF transition matrix".into()))?;
    let t = m.rows();
    let mut probs = Tensor::zeros(&[t, t]);
    for r in 0..t {
        let row = m.row(r);
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
        for (o, v) in probs.row_mut(r).iter_mut().zip(row) {
            *o = (v - mx).exp() / z;
        }
    }
    Ok(TransitionExport {
        labels: state.aux_labels(),
        raw: Tensor::matrix(t, t, m.data().to_vec()),
        probs,
    })
}

fn matrix_tsv(labels: &[String], m: &Tensor) -> String {
    let mut s = String::from("from\\to");
    for l in labels {
        s.push('\t');
        s.push_str(l);
    }
    s.push('\n');
    for (r, l) in labels.iter().enumerate() {
        s.push_str(l);
        for v in m.row(r) {
            let _ = write!(s, "\t{v:.6}");
        }
        s.push('\n');
    }
    s
}

impl TransitionExport {
    pub fn raw_tsv(&self) -> String {
        matrix_tsv(&self.labels, &self.raw)
    }

    pub fn probs_tsv(&self) -> String {
        matrix_tsv(&self.labels, &self.probs)
    }

    /// Column with the highest raw score in `row`; ties go to the smaller index.
    pub fn row_argmax(&self, row: usize) -> usize {
        let r = self.raw.row(row);
        (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best })
    }

    /// Heat map of the row-softmax probabilities as a standalone SVG.
    pub fn heatmap_svg(&self) -> String {
        let n = self.labels.len();
        let cell = 28;
        let margin = 90;
        let size = margin + n * cell;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" font-family=\"sans-serif\" font-size=\"10\">\n"
        );
        for (i, l) in self.labels.iter().enumerate() {
            let c = margin + i * cell + cell / 2;
            let _ = writeln!(s, "<text x=\"{}\" y=\"{c}\" text-anchor=\"end\">{l}</text>", margin - 4);
            let _ = writeln!(
                s,
                "<text transform=\"translate({c},{}) rotate(-60)\">{l}</text>",
                margin - 4
            );
        }
        for r in 0..n {
            for c in 0..n {
                let p = self.probs.at(r, c);
                let shade = (255.0 * (1.0 - p)).round() as u8;
                let _ = writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb(255,{shade},{shade})\"><title>{} → {}: {p:.3}</title></rect>",
                    margin + c * cell,
                    margin + r * cell,
                    self.labels[r],
                    self.labels[c]
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}
