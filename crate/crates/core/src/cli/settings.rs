use super::config::RunConfig;
use crate::datagen::SyntheticSpec;
use crate::error::{Error, Result};
use crate::losses::{AngularMarginConfig, MultiTaskConfig};
use crate::model::{
    default_anneal_decay, default_drop_epochs, Activation, EncoderSpec, LossMode, Objective,
    TrainConfig,
};

/// Keys describing the synthetic generator.
pub const GEN_KEYS: &[&str] = &[
    "num_identities",
    "input_dim",
    "samples_per_identity",
    "age_range",
    "age_effect",
    "noise_sigma",
    "seed",
];

/// Keys describing the encoder, objective and optimizer.
pub const TRAIN_KEYS: &[&str] = &[
    "mode",
    "hidden_widths",
    "embedding_dim",
    "activation",
    "m",
    "s",
    "lambda",
    "anneal_weight",
    "anneal_decay",
    "batch_size",
    "epochs",
    "learning_rate",
    "lr_drop_epochs",
    "lr_drop_factor",
    "momentum",
    "seed",
    "age_to_encoder",
    "train_age_head",
];

/// Per-command defaults for the training keys.
#[derive(Debug, Clone)]
pub struct TrainDefaults {
    pub mode: LossMode,
    pub hidden_widths: &'static [usize],
    pub embedding_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub anneal_weight: f64,
    pub lambda: f64,
    pub train_age_head: bool,
}

impl TrainDefaults {
    pub const TRAIN: TrainDefaults = TrainDefaults {
        mode: LossMode::Oe,
        hidden_widths: &[64],
        embedding_dim: 16,
        batch_size: 64,
        epochs: 21,
        learning_rate: 0.05,
        momentum: 0.9,
        anneal_weight: 5.0,
        lambda: 0.01,
        train_age_head: true,
    };
}

pub fn synthetic_spec(cfg: &RunConfig, defaults: &SyntheticSpec) -> Result<SyntheticSpec> {
    let spec = SyntheticSpec {
        num_identities: cfg.get("num_identities", defaults.num_identities)?,
        input_dim: cfg.get("input_dim", defaults.input_dim)?,
        samples_per_identity: cfg.get("samples_per_identity", defaults.samples_per_identity)?,
        age_range: cfg.get_range("age_range", defaults.age_range)?,
        age_effect: cfg.get("age_effect", defaults.age_effect)?,
        noise_sigma: cfg.get("noise_sigma", defaults.noise_sigma)?,
        seed: cfg.get("seed", defaults.seed)?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Builds the encoder spec, objective and optimizer settings for a run on
/// `num_samples` inputs of width `input_dim`.
pub fn train_settings(
    cfg: &RunConfig,
    input_dim: usize,
    num_samples: usize,
    defaults: &TrainDefaults,
) -> Result<(EncoderSpec, Objective, TrainConfig)> {
    let mode = match cfg.raw("mode") {
        None => defaults.mode,
        Some(v) => LossMode::parse(v)
            .ok_or_else(|| Error::config("mode", format!("expected softmax, a_softmax or oe, got `{v}`")))?,
    };
    let hidden: Vec<usize> = cfg
        .get_list("hidden_widths")?
        .unwrap_or_else(|| defaults.hidden_widths.to_vec());
    let embedding_dim: usize = cfg.get("embedding_dim", defaults.embedding_dim)?;
    let activation = match cfg.raw("activation").unwrap_or("relu") {
        "relu" => Activation::Relu,
        "none" => Activation::None,
        other => return Err(Error::config("activation", format!("expected relu or none, got `{other}`"))),
    };
    let mut widths = vec![input_dim];
    widths.extend(&hidden);
    widths.push(embedding_dim);
    let spec = EncoderSpec {
        hidden_activations: vec![activation; hidden.len()],
        layer_widths: widths,
    };
    spec.validate()?;

    let batch_size: usize = cfg.get("batch_size", defaults.batch_size)?;
    let epochs: usize = cfg.get("epochs", defaults.epochs)?;
    let steps_per_epoch = if batch_size == 0 { 0 } else { num_samples.div_ceil(batch_size) };
    let anneal_weight: f64 = cfg.get("anneal_weight", defaults.anneal_weight)?;
    let anneal_decay = match cfg.raw("anneal_decay") {
        None | Some("auto") => default_anneal_decay(anneal_weight, (epochs * steps_per_epoch) as u64),
        Some(_) => cfg.get("anneal_decay", 1.0)?,
    };
    let objective = Objective {
        mode,
        margin: AngularMarginConfig {
            m: cfg.get("m", 4u32)?,
            s: cfg.get("s", 32.0)?,
            anneal_weight,
            anneal_decay,
        },
        multi_task: MultiTaskConfig {
            lambda: cfg.get("lambda", defaults.lambda)?,
        },
        age_to_encoder: cfg.get_bool("age_to_encoder", true)?,
        train_age_head: cfg.get_bool("train_age_head", defaults.train_age_head)?,
    };
    objective.validate()?;

    let lr_drop_epochs = match cfg.raw("lr_drop_epochs") {
        None | Some("auto") => default_drop_epochs(epochs),
        Some(_) => cfg.get_list("lr_drop_epochs")?.unwrap_or_default(),
    };
    let train = TrainConfig {
        batch_size,
        epochs,
        learning_rate: cfg.get("learning_rate", defaults.learning_rate)?,
        lr_drop_epochs,
        lr_drop_factor: cfg.get("lr_drop_factor", 0.1)?,
        momentum: cfg.get("momentum", defaults.momentum)?,
        seed: cfg.get("seed", 0u64)?,
    };
    train.validate()?;
    Ok((spec, objective, train))
}
