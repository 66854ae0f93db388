//! Feed-forward encoder with analytic backpropagation, SGD with momentum,
//! the training loop, and checkpoint persistence.

mod checkpoint;
mod encoder;
mod sgd;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use encoder::{Activation, Encoder, EncoderGrads, EncoderParams, EncoderSpec, ForwardCache, Layer};
pub use sgd::Sgd;
pub use train::{
    default_anneal_decay, default_drop_epochs, train, EpochMetrics, LossMode, Model, ModelGrads,
    Objective, TrainConfig, TrainOutcome, TrainingSet,
};
