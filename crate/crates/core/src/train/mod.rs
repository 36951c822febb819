//! Training: joint loss, optimiser, loop, checkpoints and synthetic data.

mod average;
pub mod checkpoint;
mod loss;
mod optim;
mod synthetic;
mod trainer;

pub use average::{average_checkpoints, average_states, average_tensor_files};
pub use checkpoint::TensorFile;
pub use loss::{eval_loss, joint_loss, Example};
pub use optim::{learning_rate, Adam};
pub use synthetic::{make_synthetic_corpus, to_m2, SyntheticPair, SyntheticSpec};
pub use trainer::{exact_match, train_loop, EpochLog, TrainOutput};
