//! Recurrent and convolutional segment classifiers trained on the `ndcore`
//! tape, plus plain reference implementations of the cells they use.

pub mod cells;
pub mod conv;
mod model;
mod trace;
mod train;

pub use model::{build_model, Architecture, CnnConfig, ModelConfig, NeuralArtifact, NeuralModel, NEURAL_FORMAT_VERSION};
pub use trace::trace_unigram_importance;
pub use train::{train_model, TrainReport};
