//! The two stages chained: spelling correction, then feature-aware decoding.

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::lexicons::{FrequencyTable, PhoneticLexicon};
use crate::mlm::MaskedLm;
use crate::model::{beam_search_decode, ModelState};
use crate::sec::{correct_spelling, SecSettings, SecTrace};
use crate::tagger::FeatureExtractor;
use crate::vocab::CharSeq;

pub struct SpellingStage {
    pub lm: Box<dyn MaskedLm>,
    pub phonetic: PhoneticLexicon,
    pub freq: FrequencyTable,
    pub settings: SecSettings,
}

impl SpellingStage {
    pub fn run(&self, seq: &CharSeq) -> Result<(CharSeq, SecTrace)> {
        correct_spelling(seq, self.lm.as_ref(), &self.phonetic, &self.freq, self.settings)
    }
}

pub struct GecStage {
    pub model: ModelState,
    pub features: FeatureExtractor,
    pub beam: usize,
    pub max_len_extra: usize,
}

impl GecStage {
    pub fn new(model: ModelState, features: FeatureExtractor, cfg: &PipelineConfig) -> Self {
        GecStage {
            model,
            features,
            beam: cfg.beam_size,
            max_len_extra: cfg.max_len_extra,
        }
    }

    pub fn run(&self, seq: &CharSeq) -> Result<CharSeq> {
        let ids = self.model.vocab.encode(seq);
        let feats = self.features.feature_sequence(seq);
        beam_search_decode(&self.model, &ids, &feats, self.beam, seq.len() + self.max_len_extra)
    }
}

/// Either stage may be left out; with neither, text passes through.
#[derive(Default)]
pub struct Corrector {
    pub spelling: Option<SpellingStage>,
    pub gec: Option<GecStage>,
}

impl Corrector {
    pub fn correct(&self, seq: &CharSeq) -> Result<CharSeq> {
        if seq.is_empty() {
            return Ok(CharSeq::default());
        }
        let mut cur = seq.clone();
        if let Some(s) = &self.spelling {
            cur = s.run(&cur)?.0;
        }
        if let Some(g) = &self.gec {
            cur = g.run(&cur)?;
        }
        Ok(cur)
    }

    pub fn correct_line(&self, line: &str) -> Result<String> {
        Ok(self.correct(&CharSeq::from_text(line))?.to_text())
    }
}
