use super::autodiff::log_sum_exp;
use super::transformer::{encode_source, DecoderCache, SourceMemory};
use super::state::ModelState;
use crate::error::{contract, Result};
use crate::tagger::SemanticFeatureSeq;
use crate::vocab::{CharSeq, BOS_ID, EOS_ID, NUM_RESERVED};

struct Hyp {
    tokens: Vec<usize>,
    logp: f64,
    cache: DecoderCache,
    next: usize,
}

/// Log-probabilities of the next token, `None` for ids that may not be
/// emitted (reserved symbols other than EOS).
fn next_logprobs(state: &ModelState, mem: &SourceMemory, hyp: &mut Hyp) -> Result<Vec<Option<f64>>> {
    let logits = state.step(mem, &mut hyp.cache, hyp.next)?.token;
    let lse = log_sum_exp(&logits);
    Ok(logits
        .iter()
        .enumerate()
        .map(|(id, &l)| (id == EOS_ID || id >= NUM_RESERVED).then_some(l - lse))
        .collect())
}

fn finish(state: &ModelState, tokens: &[usize]) -> CharSeq {
    state.vocab.decode(tokens)
}

/// Length-normalised beam search over the token head. A hypothesis ends when
/// EOS ranks within the top `beam` candidates of a step, or at `max_len`.
pub fn beam_search_decode(
    state: &ModelState,
    src: &[usize],
    features: &SemanticFeatureSeq,
    beam: usize,
    max_len: usize,
) -> Result<CharSeq> {
    contract!(beam >= 1, "beam must be at least 1");
    contract!(max_len >= 1, "max_len must be at least 1");
    let h = encode_source(state, src, features)?;
    let mem = state.source_memory(&h)?;
    let mut live = vec![Hyp {
        tokens: Vec::new(),
        logp: 0.0,
        cache: state.new_cache(),
        next: BOS_ID,
    }];
    // (normalised score, tokens)
    let mut done: Vec<(f64, Vec<usize>)> = Vec::new();

    for _ in 0..max_len {
        // (total logp, hyp index, token)
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (hi, hyp) in live.iter_mut().enumerate() {
            let lp = next_logprobs(state, &mem, hyp)?;
            let mut opts: Vec<(f64, usize)> = lp
                .iter()
                .enumerate()
                .filter_map(|(t, l)| l.map(|l| (hyp.logp + l, t)))
                .collect();
            opts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            opts.truncate(2 * beam);
            cands.extend(opts.into_iter().map(|(s, t)| (s, hi, t)));
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut next = Vec::with_capacity(beam);
        for (rank, &(score, hi, t)) in cands.iter().enumerate() {
            if t == EOS_ID {
                if rank < beam {
                    let len = live[hi].tokens.len() + 1;
                    done.push((score / len as f64, live[hi].tokens.clone()));
                }
                continue;
            }
            if next.len() < beam {
                let parent = &live[hi];
                let mut tokens = parent.tokens.clone();
                tokens.push(t);
                next.push(Hyp {
                    tokens,
                    logp: score,
                    cache: parent.cache.clone(),
                    next: t,
                });
            }
            if next.len() == beam && rank + 1 >= beam {
                break;
            }
        }
        if done.len() >= beam || next.is_empty() {
            live.clear();
            break;
        }
        live = next;
    }
    for hyp in live {
        done.push((hyp.logp / hyp.tokens.len().max(1) as f64, hyp.tokens));
    }
    let best = done
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .map(|(_, d)| d.1.clone())
        .unwrap_or_default();
    Ok(finish(state, &best))
}

/// Picks the most probable permitted token at every step.
pub fn greedy_decode(
    state: &ModelState,
    src: &[usize],
    features: &SemanticFeatureSeq,
    max_len: usize,
) -> Result<CharSeq> {
    contract!(max_len >= 1, "max_len must be at least 1");
    let h = encode_source(state, src, features)?;
    let mem = state.source_memory(&h)?;
    let mut hyp = Hyp {
        tokens: Vec::new(),
        logp: 0.0,
        cache: state.new_cache(),
        next: BOS_ID,
    };
    for _ in 0..max_len {
        let lp = next_logprobs(state, &mem, &mut hyp)?;
        let mut best = (f64::NEG_INFINITY, EOS_ID);
        for (t, l) in lp.iter().enumerate() {
            if let Some(l) = *l {
                if l > best.0 {
                    best = (l, t);
                }
            }
        }
        if best.1 == EOS_ID {
            break;
        }
        hyp.tokens.push(best.1);
        hyp.next = best.1;
    }
    Ok(finish(state, &hyp.tokens))
}
