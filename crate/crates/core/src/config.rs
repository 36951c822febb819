//! Pipeline and training configuration, loadable from flat `key = value` files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionMode {
    /// POS and class embeddings concatenated, zero-padded to the model width.
    Concatenate,
    /// Each feature embedded at full model width and summed.
    Accumulate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxTask {
    PosCrf,
    PosCe,
    /// CRF-scored prediction of the level-1 semantic class sequence.
    ClassL1,
    ClassL2,
    None,
}

impl AuxTask {
    pub fn uses_crf(self) -> bool {
        matches!(self, AuxTask::PosCrf | AuxTask::ClassL1 | AuxTask::ClassL2)
    }
}

/// How the auxiliary head's output enters the CRF as an emission score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrfEmission {
    LogProb,
    Prob,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $kw:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($kw => Ok($ty::$variant),)+
                    _ => Err(format!("unknown value `{s}`")),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $kw,)+ })
            }
        }
    };
}

keyword_enum!(FusionMode { Concatenate => "concatenate", Accumulate => "accumulate" });
keyword_enum!(AuxTask {
    PosCrf => "pos_crf",
    PosCe => "pos_ce",
    ClassL1 => "class_l1",
    ClassL2 => "class_l2",
    None => "none",
});
keyword_enum!(CrfEmission { LogProb => "logprob", Prob => "prob" });

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Characters seen more than `k_c` times are never masked.
    pub k_c: u64,
    pub top_k_candidates: usize,
    pub class_levels: usize,
    pub fusion_mode: FusionMode,
    pub aux_task: AuxTask,
    pub crf_emission: CrfEmission,
    pub aux_weight: f64,
    pub tone_sensitive: bool,
    pub d_model: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub beam_size: usize,
    /// Decoding stops after `source length + max_len_extra` tokens.
    pub max_len_extra: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_c: 80_000,
            top_k_candidates: 3,
            class_levels: 3,
            fusion_mode: FusionMode::Concatenate,
            aux_task: AuxTask::PosCrf,
            crf_emission: CrfEmission::LogProb,
            aux_weight: 1.0,
            tone_sensitive: false,
            d_model: 128,
            enc_layers: 2,
            dec_layers: 2,
            heads: 4,
            d_ff: 256,
            beam_size: 12,
            max_len_extra: 10,
            seed: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.top_k_candidates == 0 {
            return fail("top_k_candidates must be at least 1");
        }
        if self.class_levels == 0 {
            return fail("class_levels must be at least 1");
        }
        if self.d_model < self.class_levels + 1 {
            return fail("d_model must be at least class_levels + 1");
        }
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return fail("d_model must be divisible by heads");
        }
        if self.beam_size == 0 {
            return fail("beam_size must be at least 1");
        }
        if matches!(self.aux_task, AuxTask::ClassL2) && self.class_levels < 2 {
            return fail("aux_task class_l2 needs class_levels >= 2");
        }
        if !(self.aux_weight.is_finite() && self.aux_weight >= 0.0) {
            return fail("aux_weight must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub warmup_steps: usize,
    pub max_epochs: usize,
    /// Target-token budget per batch.
    pub batch_tokens: usize,
    pub clip_norm: f64,
    /// Final learning rate as a fraction of the peak, reached at the last update.
    pub end_lr_ratio: f64,
    pub avg_window: usize,
    /// Stop once greedy exact match on the dev pairs reaches this fraction.
    pub early_stop_exact: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            warmup_steps: 50,
            max_epochs: 200,
            batch_tokens: 256,
            clip_norm: 1.0,
            end_lr_ratio: 0.0,
            avg_window: 5,
            early_stop_exact: None,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("beta1 and beta2 must lie in [0, 1)");
        }
        if self.adam_eps <= 0.0 {
            return fail("adam_eps must be positive");
        }
        if self.max_epochs == 0 || self.batch_tokens == 0 || self.avg_window == 0 {
            return fail("max_epochs, batch_tokens and avg_window must be positive");
        }
        if !(0.0..=1.0).contains(&self.end_lr_ratio) {
            return fail("end_lr_ratio must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Both configuration blocks; a single file may set keys of either.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("bad value for `{key}`: {e}"))
}

impl Config {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let p = &mut self.pipeline;
        let t = &mut self.train;
        match key {
            "k_c" => p.k_c = parse_value(key, value)?,
            "top_k_candidates" => p.top_k_candidates = parse_value(key, value)?,
            "class_levels" => p.class_levels = parse_value(key, value)?,
            "fusion_mode" => p.fusion_mode = parse_value(key, value)?,
            "aux_task" => p.aux_task = parse_value(key, value)?,
            "crf_emission" => p.crf_emission = parse_value(key, value)?,
            "aux_weight" => p.aux_weight = parse_value(key, value)?,
            "tone_sensitive" => p.tone_sensitive = parse_value(key, value)?,
            "d_model" | "d_E" => p.d_model = parse_value(key, value)?,
            "enc_layers" => p.enc_layers = parse_value(key, value)?,
            "dec_layers" => p.dec_layers = parse_value(key, value)?,
            "layers" => {
                let n = parse_value(key, value)?;
                p.enc_layers = n;
                p.dec_layers = n;
            }
            "heads" => p.heads = parse_value(key, value)?,
            "d_ff" | "hidden" => p.d_ff = parse_value(key, value)?,
            "beam_size" => p.beam_size = parse_value(key, value)?,
            "max_len_extra" => p.max_len_extra = parse_value(key, value)?,
            "seed" => {
                let s = parse_value(key, value)?;
                p.seed = s;
                t.seed = s;
            }
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "beta1" => t.beta1 = parse_value(key, value)?,
            "beta2" => t.beta2 = parse_value(key, value)?,
            "adam_eps" => t.adam_eps = parse_value(key, value)?,
            "warmup_steps" => t.warmup_steps = parse_value(key, value)?,
            "max_epochs" => t.max_epochs = parse_value(key, value)?,
            "batch_tokens" => t.batch_tokens = parse_value(key, value)?,
            "clip_norm" => t.clip_norm = parse_value(key, value)?,
            "end_lr_ratio" => t.end_lr_ratio = parse_value(key, value)?,
            "avg_window" => t.avg_window = parse_value(key, value)?,
            "early_stop_exact" => t.early_stop_exact = Some(parse_value(key, value)?),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, n + 1, "expected `key = value`"))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|m| Error::parse(origin, n + 1, m))?;
        }
        cfg.pipeline.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text, &path.display().to_string())
    }

    /// Serialises every pipeline key, enough to rebuild the model and its
    /// decoding settings.
    pub fn model_keys(&self) -> String {
        let p = &self.pipeline;
        format!(
            "k_c = {}\ntop_k_candidates = {}\nclass_levels = {}\nfusion_mode = {}\naux_task = {}\n\
             crf_emission = {}\naux_weight = {}\ntone_sensitive = {}\nd_model = {}\nenc_layers = {}\n\
             dec_layers = {}\nheads = {}\nd_ff = {}\nbeam_size = {}\nmax_len_extra = {}\nseed = {}\n",
            p.k_c,
            p.top_k_candidates,
            p.class_levels,
            p.fusion_mode,
            p.aux_task,
            p.crf_emission,
            p.aux_weight,
            p.tone_sensitive,
            p.d_model,
            p.enc_layers,
            p.dec_layers,
            p.heads,
            p.d_ff,
            p.beam_size,
            p.max_len_extra,
            p.seed
        )
    }
}
