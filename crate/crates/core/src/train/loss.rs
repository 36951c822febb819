use crate::config::{AuxTask, CrfEmission};
use crate::error::{contract, Result};
use crate::model::{forward_graph, Gradients, Graph, ModelState, NodeId};
use crate::tagger::{FeatureExtractor, SemanticFeatureSeq};
use crate::vocab::{CharSeq, BOS_ID, EOS_ID};

/// One tokenised training pair with its source features and the auxiliary
/// labels of the target characters.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub src: Vec<usize>,
    pub features: SemanticFeatureSeq,
    pub tgt: Vec<usize>,
    pub aux: Vec<usize>,
}

impl Example {
    pub fn new(state: &ModelState, fx: &FeatureExtractor, src: &CharSeq, tgt: &CharSeq) -> Result<Self> {
        contract!(!src.is_empty(), "empty source sentence");
        let features = fx.feature_sequence(src);
        let tf = fx.feature_sequence(tgt);
        let aux = match state.config.aux_task {
            AuxTask::PosCrf | AuxTask::PosCe => tf.pos,
            AuxTask::ClassL1 => tf.level(0),
            AuxTask::ClassL2 => tf.level(1),
            AuxTask::None => Vec::new(),
        };
        Ok(Example {
            src: state.vocab.encode(src),
            features,
            tgt: state.vocab.encode(tgt),
            aux,
        })
    }

    /// Tokens processed by one forward pass: source, BOS + target, EOS.
    pub fn size(&self) -> usize {
        self.src.len() + self.tgt.len() + 1
    }
}

/// Builds the loss node of one example: token cross-entropy over the target
/// and EOS, plus the weighted auxiliary term over the target characters.
pub(crate) fn example_loss(g: &mut Graph, state: &ModelState, ex: &Example) -> Result<NodeId> {
    let mut tgt_in = Vec::with_capacity(ex.tgt.len() + 1);
    tgt_in.push(BOS_ID);
    tgt_in.extend_from_slice(&ex.tgt);
    let mut tgt_out = ex.tgt.clone();
    tgt_out.push(EOS_ID);

    let (tok, aux) = forward_graph(g, state, &ex.src, &ex.features, &tgt_in)?;
    let logp = g.log_softmax(tok);
    let ce = g.nll(logp, &tgt_out);
    let mut terms = vec![(ce, 1.0)];

    let m = ex.tgt.len();
    if let (Some(aux), true) = (aux, m > 0) {
        contract!(ex.aux.len() == m, "{} auxiliary labels for {m} target characters", ex.aux.len());
        let n = g.value(aux).cols();
        contract!(ex.aux.iter().all(|&y| y < n), "auxiliary label out of range");
        let rows = g.slice_rows(aux, 0, m);
        let lp = g.log_softmax(rows);
        let term = match state.config.aux_task {
            AuxTask::PosCe => g.nll(lp, &ex.aux),
            _ => {
                let em = match state.config.crf_emission {
                    CrfEmission::LogProb => lp,
                    CrfEmission::Prob => g.softmax(rows),
                };
                let crf = g.param(state.ids.crf.expect("CRF tasks have transitions"));
                g.crf_nll(em, crf, &ex.aux)
            }
        };
        terms.push((term, state.config.aux_weight));
    }
    Ok(g.weighted_sum(&terms))
}

/// Summed loss over `batch` and its gradient for every parameter.
pub fn joint_loss(state: &ModelState, batch: &[Example]) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(&state.params);
    let mut total = 0.0;
    for ex in batch {
        let mut g = Graph::new(&state.params);
        let root = example_loss(&mut g, state, ex)?;
        total += g.value(root).data()[0];
        grads.add_assign(&g.backward(root));
    }
    Ok((total, grads))
}

/// Loss without gradients.
pub fn eval_loss(state: &ModelState, batch: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let mut g = Graph::new(&state.params);
        let root = example_loss(&mut g, state, ex)?;
        total += g.value(root).data()[0];
    }
    Ok(total)
}
