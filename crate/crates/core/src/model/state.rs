use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::autodiff::ParamStore;
use super::fusion::feature_dims;
use super::tensor::Tensor;
use crate::config::{AuxTask, Config, FusionMode, PipelineConfig};
use crate::error::{contract, Error, Result};
use crate::tags::{ClassAlphabet, PosTagSet};
use crate::train::checkpoint::{string_tensor, tensor_string, TensorFile};
use crate::vocab::Vocab;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Lin {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Norm {
    pub g: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Attn {
    pub q: Lin,
    pub k: Lin,
    pub v: Lin,
    pub o: Lin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct EncLayer {
    pub ln1: Norm,
    pub attn: Attn,
    pub ln2: Norm,
    pub ff1: Lin,
    pub ff2: Lin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct DecLayer {
    pub ln1: Norm,
    pub self_attn: Attn,
    pub ln2: Norm,
    pub cross: Attn,
    pub ln3: Norm,
    pub ff1: Lin,
    pub ff2: Lin,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ParamIds {
    pub word: usize,
    pub pos: usize,
    pub classes: Vec<usize>,
    pub enc: Vec<EncLayer>,
    pub enc_ln: Option<Norm>,
    pub dec: Vec<DecLayer>,
    pub dec_ln: Option<Norm>,
    pub token_head: Lin,
    pub aux_head: Option<Lin>,
    pub crf: Option<usize>,
}

struct Builder {
    store: ParamStore,
    rng: ChaCha8Rng,
}

impl Builder {
    fn push(&mut self, name: String, mut t: Tensor) -> usize {
        t.round_to_f32();
        self.store.add(name, t)
    }

    fn table(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data = (0..rows * cols).map(|_| normal.sample(&mut self.rng)).collect();
        self.push(name, Tensor::matrix(rows, cols, data))
    }

    fn lin(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Lin {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| self.rng.gen_range(-a..a)).collect();
        let w = self.push(format!("{name}.w"), Tensor::matrix(fan_in, fan_out, data));
        let b = self.push(format!("{name}.b"), Tensor::zeros(&[1, fan_out]));
        Lin { w, b }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        let g = self.push(format!("{name}.g"), Tensor::matrix(1, d, vec![1.0; d]));
        let b = self.push(format!("{name}.b"), Tensor::zeros(&[1, d]));
        Norm { g, b }
    }

    fn attn(&mut self, name: &str, d: usize) -> Attn {
        Attn {
            q: self.lin(&format!("{name}.q"), d, d),
            k: self.lin(&format!("{name}.k"), d, d),
            v: self.lin(&format!("{name}.v"), d, d),
            o: self.lin(&format!("{name}.o"), d, d),
        }
    }
}

/// Everything needed to run the sequence model: configuration, alphabets and
/// parameters. Parameter values are always `f32`-representable.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub config: PipelineConfig,
    pub vocab: Vocab,
    pub tagset: PosTagSet,
    pub alphabets: Vec<ClassAlphabet>,
    pub params: ParamStore,
    pub(crate) ids: ParamIds,
}

impl PartialEq for ModelState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.vocab == other.vocab
            && self.tagset == other.tagset
            && self.alphabets == other.alphabets
            && self.params == other.params
    }
}

impl ModelState {
    /// Randomly initialised model. The RNG is seeded from `config.seed`.
    pub fn new(
        config: &PipelineConfig,
        vocab: Vocab,
        tagset: PosTagSet,
        alphabets: Vec<ClassAlphabet>,
    ) -> Result<Self> {
        config.validate()?;
        let k = config.class_levels;
        if alphabets.len() != k {
            return Err(Error::Config(format!(
                "{} class alphabets for class_levels = {k}",
                alphabets.len()
            )));
        }
        let d = config.d_model;
        let (dp, dc, _) = match config.fusion_mode {
            FusionMode::Concatenate => feature_dims(d, k)?,
            FusionMode::Accumulate => (d, d, 0),
        };
        let aux_size = match config.aux_task {
            AuxTask::PosCrf | AuxTask::PosCe => Some(tagset.len()),
            AuxTask::ClassL1 => Some(alphabets[0].len()),
            AuxTask::ClassL2 => Some(alphabets[1].len()),
            AuxTask::None => None,
        };

        let mut b = Builder {
            store: ParamStore::default(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let word = b.table("emb.word".into(), vocab.len(), d);
        let pos = b.table("emb.pos".into(), tagset.len(), dp);
        let classes = alphabets
            .iter()
            .enumerate()
            .map(|(l, a)| b.table(format!("emb.class{}", l + 1), a.len(), dc))
            .collect();
        let enc = (0..config.enc_layers)
            .map(|i| EncLayer {
                ln1: b.norm(&format!("enc.{i}.ln1"), d),
                attn: b.attn(&format!("enc.{i}.attn"), d),
                ln2: b.norm(&format!("enc.{i}.ln2"), d),
                ff1: b.lin(&format!("enc.{i}.ff1"), d, config.d_ff),
                ff2: b.lin(&format!("enc.{i}.ff2"), config.d_ff, d),
            })
            .collect();
        let enc_ln = (config.enc_layers > 0).then(|| b.norm("enc.ln", d));
        let dec = (0..config.dec_layers)
            .map(|i| DecLayer {
                ln1: b.norm(&format!("dec.{i}.ln1"), d),
                self_attn: b.attn(&format!("dec.{i}.self"), d),
                ln2: b.norm(&format!("dec.{i}.ln2"), d),
                cross: b.attn(&format!("dec.{i}.cross"), d),
                ln3: b.norm(&format!("dec.{i}.ln3"), d),
                ff1: b.lin(&format!("dec.{i}.ff1"), d, config.d_ff),
                ff2: b.lin(&format!("dec.{i}.ff2"), config.d_ff, d),
            })
            .collect();
        let dec_ln = (config.dec_layers > 0).then(|| b.norm("dec.ln", d));
        let token_head = b.lin("head.token", d, vocab.len());
        let aux_head = aux_size.map(|n| b.lin("head.aux", d, n));
        let crf = match (config.aux_task.uses_crf(), aux_size) {
            (true, Some(n)) => Some(b.push("crf.transitions".into(), Tensor::zeros(&[n, n]))),
            _ => None,
        };
        Ok(ModelState {
            config: config.clone(),
            vocab,
            tagset,
            alphabets,
            params: b.store,
            ids: ParamIds {
                word,
                pos,
                classes,
                enc,
                enc_ln,
                dec,
                dec_ln,
                token_head,
                aux_head,
                crf,
            },
        })
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    /// Size of the auxiliary head's label alphabet, if the head exists.
    pub fn aux_size(&self) -> Option<usize> {
        self.ids.aux_head.map(|l| self.params.get(l.w).cols())
    }

    pub fn transitions(&self) -> Option<&Tensor> {
        self.ids.crf.map(|i| self.params.get(i))
    }

    pub fn word_table(&self) -> &Tensor {
        self.params.get(self.ids.word)
    }

    pub fn pos_table(&self) -> &Tensor {
        self.params.get(self.ids.pos)
    }

    pub fn class_table(&self, level: usize) -> &Tensor {
        self.params.get(self.ids.classes[level])
    }

    /// Zeroes the POS and class embedding tables.
    pub fn zero_feature_tables(&mut self) {
        self.params.get_mut(self.ids.pos).fill(0.0);
        for &c in &self.ids.classes {
            self.params.get_mut(c).fill(0.0);
        }
    }

    /// Labels of the auxiliary alphabet in id order.
    pub fn aux_labels(&self) -> Vec<String> {
        match self.config.aux_task {
            AuxTask::PosCrf | AuxTask::PosCe => self.tagset.names().to_vec(),
            AuxTask::ClassL1 | AuxTask::ClassL2 => {
                let l = if self.config.aux_task == AuxTask::ClassL1 { 0 } else { 1 };
                let a = &self.alphabets[l];
                (0..a.len()).map(|i| a.code(i).unwrap_or("-").to_string()).collect()
            }
            AuxTask::None => Vec::new(),
        }
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let mut f = TensorFile::default();
        let cfg = Config {
            pipeline: self.config.clone(),
            ..Config::default()
        };
        f.push("meta.config", string_tensor(&cfg.model_keys()));
        f.push(
            "meta.vocab",
            Tensor::vector(self.vocab.chars().iter().map(|&c| c as u32 as f64).collect()),
        );
        f.push("meta.tags", string_tensor(&self.tagset.names().join("\n")));
        for (l, a) in self.alphabets.iter().enumerate() {
            f.push(format!("meta.class{}", l + 1), string_tensor(&a.codes().join("\n")));
        }
        for (name, t) in self.params.iter() {
            f.push(name, t.clone());
        }
        f
    }

    pub fn from_tensor_file(f: &TensorFile) -> Result<Self> {
        let cfg = Config::parse(&tensor_string(f.require("meta.config")?)?, "meta.config")?;
        let chars = f
            .require("meta.vocab")?
            .data()
            .iter()
            .map(|&v| char::from_u32(v as u32).ok_or_else(|| Error::Data(format!("bad vocab code point {v}"))))
            .collect::<Result<Vec<_>>>()?;
        let tags = tensor_string(f.require("meta.tags")?)?;
        let tagset = PosTagSet::new(tags.split('\n').map(str::to_string).collect())?;
        let alphabets = (1..=cfg.pipeline.class_levels)
            .map(|l| {
                let s = tensor_string(f.require(&format!("meta.class{l}"))?)?;
                let codes = if s.is_empty() {
                    Vec::new()
                } else {
                    s.split('\n').map(str::to_string).collect()
                };
                Ok(ClassAlphabet::new(codes))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut state = ModelState::new(&cfg.pipeline, Vocab::from_chars(chars), tagset, alphabets)?;
        for i in 0..state.params.len() {
            let name = state.params.name(i).to_string();
            let t = f.require(&name)?;
            let slot = state.params.get_mut(i);
            if t.shape() != slot.shape() {
                return Err(Error::Data(format!(
                    "tensor {name}: shape {:?} does not match model {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
        }
        Ok(state)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_tensor_file().save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::load(path)?)
    }

    /// Checks that per-character features index into this model's tables.
    pub(crate) fn check_features(&self, n: usize, f: &crate::tagger::SemanticFeatureSeq) -> Result<()> {
        contract!(f.len() == n, "{} features for {n} characters", f.len());
        contract!(f.classes.len() == n, "{} class rows for {n} characters", f.classes.len());
        let t = self.tagset.len();
        contract!(f.pos.iter().all(|&p| p < t), "POS id out of range");
        for c in &f.classes {
            contract!(c.len() == self.alphabets.len(), "class levels mismatch");
            for (l, &id) in c.iter().enumerate() {
                contract!(id < self.alphabets[l].len(), "class id out of range at level {}", l + 1);
            }
        }
        Ok(())
    }
}
