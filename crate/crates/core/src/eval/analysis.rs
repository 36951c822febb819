//! Word-level comparison of erroneous and corrected sentences: how often the
//! POS sequence changes, and how far mis-tagged correct words sit from the
//! nearest erroneous word.

use serde::Serialize;

use super::lcs::lcs;
use crate::tagger::{TaggedWord, Tagger};
use crate::vocab::CharSeq;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub pairs: usize,
    /// Pairs whose source differs from the target.
    pub erroneous_pairs: usize,
    /// Share of erroneous pairs whose source and target POS sequences differ.
    pub divergence_rate: f64,
    /// Corr-words over all erroneous pairs, and how many keep their tag.
    pub corr_words: usize,
    pub corr_correct_pos: usize,
    /// Mean word distance from Corr-words to the nearest Err-word, split by
    /// whether the Corr-word's tag matches its target counterpart. `None`
    /// when there is no such word.
    pub mean_dist_wrong_pos: Option<f64>,
    pub mean_dist_correct_pos: Option<f64>,
    pub wrong_pos_words: usize,
    pub correct_pos_words: usize,
}

/// Per-sentence detail used by the report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SentenceAnalysis {
    pub src_words: Vec<String>,
    pub corr: Vec<bool>,
    /// For Corr-words: whether the tag equals the matched target word's tag.
    pub pos_correct: Vec<Option<bool>>,
    /// For Corr-words: distance to the nearest Err-word, if any.
    pub distance: Vec<Option<usize>>,
    pub pos_diverges: bool,
}

fn tags(words: &[TaggedWord]) -> Vec<usize> {
    words.iter().map(|w| w.tag).collect()
}

pub fn analyze_pair(src: &CharSeq, tgt: &CharSeq, tagger: &dyn Tagger) -> SentenceAnalysis {
    let sw = tagger.tag_sentence(src);
    let tw = tagger.tag_sentence(tgt);
    let s_text: Vec<&str> = sw.iter().map(|w| w.text.as_str()).collect();
    let t_text: Vec<&str> = tw.iter().map(|w| w.text.as_str()).collect();
    let mut corr = vec![false; sw.len()];
    let mut pos_correct = vec![None; sw.len()];
    for (i, j) in lcs(&s_text, &t_text) {
        corr[i] = true;
        pos_correct[i] = Some(sw[i].tag == tw[j].tag);
    }
    let errs: Vec<usize> = (0..sw.len()).filter(|&i| !corr[i]).collect();
    let distance = (0..sw.len())
        .map(|i| {
            if !corr[i] {
                return None;
            }
            errs.iter().map(|&e| e.abs_diff(i)).min()
        })
        .collect();
    SentenceAnalysis {
        src_words: sw.iter().map(|w| w.text.clone()).collect(),
        corr,
        pos_correct,
        distance,
        pos_diverges: tags(&sw) != tags(&tw),
    }
}

fn mean(xs: &[usize]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<usize>() as f64 / xs.len() as f64)
}

/// Corpus statistics over the pairs whose source differs from the target.
pub fn analyze_corpus(corpus: &[(CharSeq, CharSeq)], tagger: &dyn Tagger) -> AnalysisReport {
    let mut erroneous = 0;
    let mut diverging = 0;
    let (mut corr_words, mut corr_ok) = (0, 0);
    let (mut wrong, mut right) = (Vec::new(), Vec::new());
    for (src, tgt) in corpus {
        if src == tgt {
            continue;
        }
        erroneous += 1;
        let a = analyze_pair(src, tgt, tagger);
        diverging += usize::from(a.pos_diverges);
        for (ok, dist) in a.pos_correct.iter().zip(&a.distance) {
            let Some(ok) = *ok else { continue };
            corr_words += 1;
            corr_ok += usize::from(ok);
            if let Some(d) = *dist {
                if ok {
                    right.push(d);
                } else {
                    wrong.push(d);
                }
            }
        }
    }
    AnalysisReport {
        pairs: corpus.len(),
        erroneous_pairs: erroneous,
        divergence_rate: if erroneous == 0 { 0.0 } else { diverging as f64 / erroneous as f64 },
        corr_words,
        corr_correct_pos: corr_ok,
        mean_dist_wrong_pos: mean(&wrong),
        mean_dist_correct_pos: mean(&right),
        wrong_pos_words: wrong.len(),
        correct_pos_words: right.len(),
    }
}

pub fn pos_divergence_rate(corpus: &[(CharSeq, CharSeq)], tagger: &dyn Tagger) -> f64 {
    analyze_corpus(corpus, tagger).divergence_rate
}

/// `(mean distance of wrong-POS Corr-words, mean distance of correct-POS
/// Corr-words)` to the nearest Err-word.
pub fn err_distance_stats(corpus: &[(CharSeq, CharSeq)], tagger: &dyn Tagger) -> (Option<f64>, Option<f64>) {
    let r = analyze_corpus(corpus, tagger);
    (r.mean_dist_wrong_pos, r.mean_dist_correct_pos)
}
