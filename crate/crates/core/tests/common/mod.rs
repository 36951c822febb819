#![allow(dead_code)]

use zhgec::lexicons::{PhoneticLexicon, PosLexicon};
use zhgec::model::ModelState;
use zhgec::resources;
use zhgec::tagger::FeatureExtractor;
use zhgec::train::{make_synthetic_corpus, Example, SyntheticPair, SyntheticSpec};
use zhgec::vocab::{build_vocab, CharSeq};
use zhgec::PipelineConfig;

pub struct Desk {
    pub phonetic: PhoneticLexicon,
    pub pos: PosLexicon,
    pub fx: FeatureExtractor,
}

impl Desk {
    pub fn new(class_levels: usize) -> Self {
        let pos = resources::pos_lexicon();
        Desk {
            phonetic: resources::phonetic_lexicon(),
            fx: FeatureExtractor::new(pos.clone(), resources::semclass_dict(), class_levels),
            pos,
        }
    }

    pub fn corpus(&self, spec: &SyntheticSpec) -> Vec<SyntheticPair> {
        make_synthetic_corpus(spec, &self.phonetic, &self.pos).unwrap()
    }

    /// A model whose vocabulary covers both sides of `pairs`.
    pub fn model(&self, cfg: &PipelineConfig, pairs: &[SyntheticPair]) -> ModelState {
        let text: Vec<CharSeq> = pairs
            .iter()
            .flat_map(|p| [p.erroneous.clone(), p.correct.clone()])
            .collect();
        let vocab = build_vocab(&text, 1).unwrap();
        ModelState::new(cfg, vocab, self.fx.tagset().clone(), self.fx.alphabets.clone()).unwrap()
    }

    pub fn examples(&self, state: &ModelState, pairs: &[SyntheticPair]) -> Vec<Example> {
        pairs
            .iter()
            .map(|p| Example::new(state, &self.fx, &p.erroneous, &p.correct).unwrap())
            .collect()
    }
}

pub fn spec(size: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        templates: resources::templates(),
        size,
        seed,
        ..SyntheticSpec::default()
    }
}

pub fn small_config(d_model: usize, layers: usize) -> PipelineConfig {
    PipelineConfig {
        d_model,
        enc_layers: layers,
        dec_layers: layers,
        heads: 2,
        d_ff: 2 * d_model,
        beam_size: 4,
        max_len_extra: 4,
        ..PipelineConfig::default()
    }
}
