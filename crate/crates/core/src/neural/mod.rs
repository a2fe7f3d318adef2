//! From-scratch CNN-LSTM classifier over 2-channel S11 sequences.
//!
//! ```text
//! [2 × N] → (conv → act)* → avg-pool → LSTM (last hidden) → (dense → act)* → dense → logits[5]
//! ```
//!
//! Gradients are hand-derived reverse mode through every layer. They are
//! checked against central finite differences in the test suite.

mod io;
mod metrics;
mod model;
mod preprocess;
mod tensor;
mod train;

pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use metrics::{ClassScores, Metrics};
pub use model::{softmax, Activation, ConvParams, ConvSpec, DenseParams, LstmParams, Model, ModelConfig, Params};
pub use preprocess::{ablate_phase, examples_from, preprocess, preprocess_s11, Example};
pub use tensor::Tensor;
pub use train::{
    evaluate, loss_accuracy, pairwise_accuracy, predict, train, EpochStats, History, Schedule, TrainConfig,
    TrainOutcome, HISTORY_HEADER,
};
