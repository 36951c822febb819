//! Two-stage Chinese grammatical error correction at desk scale.
//!
//! A zero-shot spelling pass (masked-LM candidates filtered by homophony)
//! feeds a small encoder-decoder whose input embeddings carry POS and
//! semantic-class features and whose decoder has an auxiliary CRF-scored
//! tag head. Scoring, corpus diagnostics and a synthetic data generator
//! live alongside.

pub mod config;
pub mod error;
pub mod eval;
pub mod lexicons;
pub mod mlm;
pub mod model;
pub mod pipeline;
pub mod resources;
pub mod sec;
pub mod tagger;
pub mod tags;
pub mod train;
pub mod vocab;

pub use config::{AuxTask, Config, CrfEmission, FusionMode, PipelineConfig, TrainConfig};
pub use error::{Error, Result};
pub use vocab::{build_vocab, CharSeq, Token, Vocab};
