//! Linear-chain CRF over per-position emission scores.
//!
//! A tag sequence scores `Σ_t E[t, y_t] + Σ_{t≥1} M[y_{t-1}, y_t]`; there are
//! no start or end transitions.

use super::autodiff::log_sum_exp;
use super::tensor::Tensor;
use crate::error::{contract, Result};

fn check(transitions: &Tensor, emissions: &Tensor) -> Result<()> {
    let t = transitions.rows();
    contract!(
        transitions.shape().len() == 2 && transitions.cols() == t,
        "transition matrix must be square, got {:?}",
        transitions.shape()
    );
    contract!(
        emissions.shape().len() == 2 && emissions.cols() == t,
        "emissions {:?} do not match {t} tags",
        emissions.shape()
    );
    contract!(emissions.rows() >= 1, "CRF needs at least one position");
    Ok(())
}

fn check_tags(emissions: &Tensor, tags: &[usize]) -> Result<()> {
    contract!(
        tags.len() == emissions.rows(),
        "{} tags for {} positions",
        tags.len(),
        emissions.rows()
    );
    let t = emissions.cols();
    contract!(tags.iter().all(|&y| y < t), "tag index out of range (T = {t})");
    Ok(())
}

fn score_unchecked(m: &Tensor, e: &Tensor, tags: &[usize]) -> f64 {
    let mut s = 0.0;
    for (t, &y) in tags.iter().enumerate() {
        s += e.at(t, y);
        if t > 0 {
            s += m.at(tags[t - 1], y);
        }
    }
    s
}

/// Forward log-potentials `alpha[t][y]`.
fn forward(m: &Tensor, e: &Tensor) -> Vec<Vec<f64>> {
    let (n, k) = (e.rows(), e.cols());
    let mut alpha = vec![e.row(0).to_vec()];
    let mut buf = vec![0.0; k];
    for t in 1..n {
        let prev = &alpha[t - 1];
        let row = (0..k)
            .map(|y| {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = prev[i] + m.at(i, y);
                }
                log_sum_exp(&buf) + e.at(t, y)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

fn backward(m: &Tensor, e: &Tensor) -> Vec<Vec<f64>> {
    let (n, k) = (e.rows(), e.cols());
    let mut beta = vec![vec![0.0; k]; n];
    let mut buf = vec![0.0; k];
    for t in (0..n.saturating_sub(1)).rev() {
        for y in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = m.at(y, j) + e.at(t + 1, j) + beta[t + 1][j];
            }
            beta[t][y] = log_sum_exp(&buf);
        }
    }
    beta
}

pub fn crf_sequence_score(transitions: &Tensor, emissions: &Tensor, tags: &[usize]) -> Result<f64> {
    check(transitions, emissions)?;
    check_tags(emissions, tags)?;
    Ok(score_unchecked(transitions, emissions, tags))
}

pub fn crf_log_partition(transitions: &Tensor, emissions: &Tensor) -> Result<f64> {
    check(transitions, emissions)?;
    let alpha = forward(transitions, emissions);
    Ok(log_sum_exp(alpha.last().unwrap()))
}

pub fn crf_neg_log_likelihood(transitions: &Tensor, emissions: &Tensor, tags: &[usize]) -> Result<f64> {
    let s = crf_sequence_score(transitions, emissions, tags)?;
    Ok(crf_log_partition(transitions, emissions)? - s)
}

/// Posterior marginals: per-position tag probabilities (m × T) and expected
/// transition counts summed over positions (T × T).
pub fn crf_marginals(transitions: &Tensor, emissions: &Tensor) -> Result<(Tensor, Tensor)> {
    check(transitions, emissions)?;
    let (unary, pair, _) = marginals(transitions, emissions);
    Ok((unary, pair))
}

fn marginals(m: &Tensor, e: &Tensor) -> (Tensor, Tensor, f64) {
    let (n, k) = (e.rows(), e.cols());
    let alpha = forward(m, e);
    let beta = backward(m, e);
    let log_z = log_sum_exp(&alpha[n - 1]);
    let mut unary = Tensor::zeros(&[n, k]);
    for t in 0..n {
        for y in 0..k {
            unary.set(t, y, (alpha[t][y] + beta[t][y] - log_z).exp());
        }
    }
    let mut pair = Tensor::zeros(&[k, k]);
    for t in 1..n {
        for i in 0..k {
            for j in 0..k {
                let lp = alpha[t - 1][i] + m.at(i, j) + e.at(t, j) + beta[t][j] - log_z;
                pair.set(i, j, pair.at(i, j) + lp.exp());
            }
        }
    }
    (unary, pair, log_z)
}

/// NLL with its gradients w.r.t. emissions and transitions. An empty tag
/// sequence contributes nothing.
pub(crate) fn nll_with_gradients(m: &Tensor, e: &Tensor, tags: &[usize]) -> (f64, Tensor, Tensor) {
    let k = m.rows();
    if tags.is_empty() {
        return (0.0, Tensor::zeros(&[0, k]), Tensor::zeros(&[k, k]));
    }
    let (mut d_e, mut d_m, log_z) = marginals(m, e);
    for (t, &y) in tags.iter().enumerate() {
        d_e.set(t, y, d_e.at(t, y) - 1.0);
        if t > 0 {
            let p = tags[t - 1];
            d_m.set(p, y, d_m.at(p, y) - 1.0);
        }
    }
    (log_z - score_unchecked(m, e, tags), d_e, d_m)
}

/// Max-scoring tag path. Ties pick the smallest tag for the last position
/// and the smallest predecessor at every backtrack step.
pub fn viterbi_decode(transitions: &Tensor, emissions: &Tensor) -> Result<(Vec<usize>, f64)> {
    check(transitions, emissions)?;
    let (n, k) = (emissions.rows(), emissions.cols());
    let mut delta = emissions.row(0).to_vec();
    let mut back = vec![vec![0usize; k]; n];
    for t in 1..n {
        let mut next = vec![0.0; k];
        for y in 0..k {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, &d) in delta.iter().enumerate() {
                let s = d + transitions.at(i, y);
                if s > best.1 {
                    best = (i, s);
                }
            }
            back[t][y] = best.0;
            next[y] = best.1 + emissions.at(t, y);
        }
        delta = next;
    }
    let mut last = 0;
    for y in 1..k {
        if delta[y] > delta[last] {
            last = y;
        }
    }
    let score = delta[last];
    let mut tags = vec![last; n];
    for t in (1..n).rev() {
        tags[t - 1] = back[t][tags[t]];
    }
    Ok((tags, score))
}
