//! Encoder–decoder sequence model with feature fusion, a token head, an
//! auxiliary tagging head and a linear-chain CRF.

pub mod autodiff;
mod beam;
pub mod crf;
mod fusion;
mod state;
pub mod tensor;
mod transformer;

pub use autodiff::{Gradients, Graph, NodeId, ParamStore};
pub use beam::{beam_search_decode, greedy_decode};
pub use crf::{crf_log_partition, crf_marginals, crf_neg_log_likelihood, crf_sequence_score, viterbi_decode};
pub use fusion::{feature_dims, fuse_embeddings, positional_encoding};
pub use state::ModelState;
pub use tensor::Tensor;
pub use transformer::{decode_step, encode, encode_source, DecoderCache, SourceMemory, StepLogits};

pub(crate) use transformer::forward_graph;
