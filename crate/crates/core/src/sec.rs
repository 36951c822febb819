//! Zero-shot spelling correction: mask each suspicious character, ask the
//! masked LM for candidates and accept the best-ranked homophone.

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{contract, Error, Result};
use crate::eval::PrfScore;
use crate::lexicons::{is_maskable, sim_set, FrequencyTable, PhoneticLexicon};
use crate::mlm::{masked, top_k_candidates, MaskedLm};
use crate::vocab::{CharSeq, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SecReason {
    NotMaskable,
    NoCandidateInSimset,
    Replaced,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecRecord {
    pub position: usize,
    pub original: char,
    pub masked: bool,
    pub candidates: Vec<char>,
    pub replacement: Option<char>,
    pub reason: SecReason,
}

/// One record per input position.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SecTrace {
    pub records: Vec<SecRecord>,
}

impl SecTrace {
    pub fn replacements(&self) -> impl Iterator<Item = &SecRecord> {
        self.records.iter().filter(|r| r.reason == SecReason::Replaced)
    }
}

/// Spelling-correction settings pulled out of a [`PipelineConfig`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecSettings {
    pub k_c: u64,
    pub top_k: usize,
    pub tone_sensitive: bool,
}

impl From<&PipelineConfig> for SecSettings {
    fn from(cfg: &PipelineConfig) -> Self {
        SecSettings {
            k_c: cfg.k_c,
            top_k: cfg.top_k_candidates,
            tone_sensitive: cfg.tone_sensitive,
        }
    }
}

/// Corrects substitution-type spelling errors left to right. Each masked
/// query sees the corrections already made earlier in the sentence.
pub fn correct_spelling(
    seq: &CharSeq,
    lm: &dyn MaskedLm,
    lex: &PhoneticLexicon,
    ft: &FrequencyTable,
    settings: SecSettings,
) -> Result<(CharSeq, SecTrace)> {
    contract!(!seq.has_reserved(), "input contains reserved symbols");
    let mut current = seq.clone();
    let mut records = Vec::with_capacity(seq.len());
    for (position, token) in seq.tokens().iter().enumerate() {
        let Token::Char(original) = *token else {
            unreachable!("checked above")
        };
        if !is_maskable(ft, original, settings.k_c) {
            records.push(SecRecord {
                position,
                original,
                masked: false,
                candidates: Vec::new(),
                replacement: None,
                reason: SecReason::NotMaskable,
            });
            continue;
        }
        let query = masked(&current, position);
        let prediction = top_k_candidates(lm, &query, position, settings.top_k)?;
        let homophones = sim_set(lex, original, settings.tone_sensitive);
        let candidates = prediction.chars();
        let choice = candidates.iter().copied().find(|c| homophones.contains(c));
        if let Some(r) = choice {
            current.tokens_mut()[position] = Token::Char(r);
        }
        records.push(SecRecord {
            position,
            original,
            masked: true,
            candidates,
            replacement: choice,
            reason: if choice.is_some() {
                SecReason::Replaced
            } else {
                SecReason::NoCandidateInSimset
            },
        });
    }
    Ok((current, SecTrace { records }))
}

/// Character-substitution scores of one threshold setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub k_c: u64,
    pub score: PrfScore,
}

/// Counts substitution corrections of `output` against `gold`, both aligned
/// position by position with `source`.
pub fn substitution_counts(source: &CharSeq, output: &CharSeq, gold: &CharSeq) -> Result<(usize, usize, usize)> {
    if source.len() != gold.len() || source.len() != output.len() {
        return Err(Error::Data(format!(
            "substitution-only pair has lengths {} / {} / {}",
            source.len(),
            output.len(),
            gold.len()
        )));
    }
    let (mut tp, mut sys, mut gold_n) = (0, 0, 0);
    for ((s, o), g) in source.tokens().iter().zip(output.tokens()).zip(gold.tokens()) {
        if o != s {
            sys += 1;
            if o == g {
                tp += 1;
            }
        }
        if g != s {
            gold_n += 1;
        }
    }
    Ok((tp, sys, gold_n))
}

/// Runs spelling correction over `dataset` (erroneous, gold) for each
/// threshold and scores substitution precision, recall and F0.5.
pub fn sweep_threshold(
    dataset: &[(CharSeq, CharSeq)],
    lm: &dyn MaskedLm,
    lex: &PhoneticLexicon,
    ft: &FrequencyTable,
    k_c_values: &[u64],
    base: SecSettings,
) -> Result<Vec<SweepPoint>> {
    for (src, gold) in dataset {
        if src.len() != gold.len() {
            return Err(Error::Data(format!(
                "pair lengths differ ({} vs {}): `{src}` / `{gold}`",
                src.len(),
                gold.len()
            )));
        }
    }
    k_c_values
        .iter()
        .map(|&k_c| {
            let settings = SecSettings { k_c, ..base };
            let (mut tp, mut sys, mut gold) = (0, 0, 0);
            for (src, g) in dataset {
                let (out, _) = correct_spelling(src, lm, lex, ft, settings)?;
                let (a, b, c) = substitution_counts(src, &out, g)?;
                tp += a;
                sys += b;
                gold += c;
            }
            Ok(SweepPoint {
                k_c,
                score: PrfScore::from_counts(tp, sys, gold, 0.5),
            })
        })
        .collect()
}

/// The threshold with the best precision, ties to the better F0.5 and then
/// the smaller threshold.
pub fn best_by_precision(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points.iter().filter(|p| p.score.sys_count > 0).max_by(|a, b| {
        a.score
            .precision
            .total_cmp(&b.score.precision)
            .then(a.score.f_beta.total_cmp(&b.score.f_beta))
            .then(b.k_c.cmp(&a.k_c))
    })
}

/// The threshold with the best F0.5, ties to the smaller threshold.
pub fn best_by_f(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points
        .iter()
        .filter(|p| p.score.sys_count > 0)
        .max_by(|a, b| a.score.f_beta.total_cmp(&b.score.f_beta).then(b.k_c.cmp(&a.k_c)))
}
