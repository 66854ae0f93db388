use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, FORMAT_VERSION};
use super::encoder::{Encoder, EncoderGrads, EncoderSpec};
use super::sgd::Sgd;
use crate::error::{Error, Result};
use crate::losses::{
    age_loss, identity_loss, predict_angular, predict_linear, softmax_loss, AgeHead,
    AngularClassifier, AngularMarginConfig, LabeledBatch, MultiTaskConfig,
};
use crate::numerics::{Matrix, RandomSource};

/// Which objective drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Plain softmax cross-entropy on unnormalized logits.
    Softmax,
    /// Angular-margin identity loss alone.
    ASoftmax,
    /// Identity loss plus λ times the norm-based age regression.
    Oe,
}

impl LossMode {
    pub fn name(self) -> &'static str {
        match self {
            LossMode::Softmax => "softmax",
            LossMode::ASoftmax => "a_softmax",
            LossMode::Oe => "oe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "softmax" => Some(LossMode::Softmax),
            "a_softmax" => Some(LossMode::ASoftmax),
            "oe" => Some(LossMode::Oe),
            _ => None,
        }
    }

    fn is_angular(self) -> bool {
        self != LossMode::Softmax
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub mode: LossMode,
    pub margin: AngularMarginConfig,
    pub multi_task: MultiTaskConfig,
    /// Backpropagate the age loss through the feature norm into the encoder.
    /// When false only the age head learns from it.
    pub age_to_encoder: bool,
    /// Update the age head's slope and intercept.
    pub train_age_head: bool,
}

impl Objective {
    pub fn new(mode: LossMode) -> Self {
        Self {
            mode,
            margin: AngularMarginConfig::default(),
            multi_task: MultiTaskConfig::default(),
            age_to_encoder: true,
            train_age_head: true,
        }
    }

    /// λ actually applied: only the joint mode trains on the age loss.
    pub fn effective_lambda(&self) -> f64 {
        match self.mode {
            LossMode::Oe => self.multi_task.lambda,
            LossMode::ASoftmax | LossMode::Softmax => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.margin.validate()?;
        self.multi_task.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Epochs (0-based) at whose start the learning rate is multiplied by
    /// `lr_drop_factor`.
    pub lr_drop_epochs: Vec<usize>,
    pub lr_drop_factor: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor < 1.0) {
            return Err(Error::config("lr_drop_factor", "must lie in (0, 1)"));
        }
        if !(self.momentum >= 0.0 && self.momentum.is_finite()) {
            return Err(Error::config("momentum", "must be >= 0"));
        }
        if self.lr_drop_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("lr_drop_epochs", "must be strictly increasing"));
        }
        if self.lr_drop_epochs.last().is_some_and(|&d| d >= self.epochs) {
            return Err(Error::config("lr_drop_epochs", "every drop must be < epochs"));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_drop_epochs.iter().filter(|&&d| d <= epoch).count();
        self.learning_rate * self.lr_drop_factor.powi(drops as i32)
    }
}

/// Drop epochs at 9/21, 15/21 and 18/21 of the run, deduplicated.
pub fn default_drop_epochs(epochs: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [9usize, 15, 18]
        .iter()
        .map(|f| ((epochs * f) as f64 / 21.0).round() as usize)
        .filter(|&d| d >= 1 && d < epochs)
        .collect();
    out.dedup();
    out
}

/// Per-step decay taking `anneal_weight` down to 0.05 after 80% of
/// `total_steps`.
pub fn default_anneal_decay(anneal_weight: f64, total_steps: u64) -> f64 {
    if anneal_weight <= 0.05 || total_steps == 0 {
        return 1.0;
    }
    let horizon = (0.8 * total_steps as f64).max(1.0);
    (0.05 / anneal_weight).powf(1.0 / horizon)
}

/// Training inputs with dense class labels `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub ages: Vec<f64>,
    pub num_classes: usize,
}

impl TrainingSet {
    pub fn validate(&self) -> Result<()> {
        let n = self.inputs.rows();
        if n == 0 {
            return Err(Error::config("dataset", "training set is empty"));
        }
        if self.labels.len() != n || self.ages.len() != n {
            return Err(Error::Shape(format!(
                "{n} inputs but {} labels and {} ages",
                self.labels.len(),
                self.ages.len()
            )));
        }
        if let Some((index, &label)) = self.labels.iter().enumerate().find(|(_, &l)| l >= self.num_classes) {
            return Err(Error::Label {
                index,
                label,
                classes: self.num_classes,
            });
        }
        Ok(())
    }
}

/// Encoder, class weights and age head trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: Encoder,
    pub classifier: AngularClassifier,
    pub head: AgeHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: EncoderGrads,
    pub classifier: Matrix,
    pub head: (f64, f64),
}

/// Loss values of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub identity: f64,
    pub age: f64,
}

impl Model {
    pub fn init(spec: EncoderSpec, num_classes: usize, rng: &mut RandomSource) -> Result<Self> {
        let encoder = Encoder::init(spec, rng)?;
        let classifier = AngularClassifier::random(num_classes, encoder.spec.output_dim(), rng);
        Ok(Self {
            encoder,
            classifier,
            head: AgeHead::default(),
        })
    }

    /// Loss, gradients of every parameter, and the embeddings of `inputs`.
    pub fn loss_and_grads(
        &self,
        inputs: &Matrix,
        labels: &[usize],
        ages: &[f64],
        objective: &Objective,
        step: u64,
    ) -> Result<(LossBreakdown, ModelGrads, Matrix)> {
        let (embeddings, cache) = self.encoder.forward_cached(inputs)?;
        let batch = LabeledBatch::new(embeddings, labels.to_vec(), ages.to_vec())?;
        let age = age_loss(&batch, &self.head)?;

        let (breakdown, grad_features, grad_classifier, grad_head) = match objective.mode {
            LossMode::Softmax => {
                let id = softmax_loss(&batch, &self.classifier)?;
                (
                    LossBreakdown { total: id.value, identity: id.value, age: age.value },
                    id.grad_features,
                    id.grad_weights,
                    (0.0, 0.0),
                )
            }
            LossMode::ASoftmax | LossMode::Oe => {
                let lambda = objective.effective_lambda();
                let id = identity_loss(&batch, &self.classifier, &objective.margin.at_step(step))?;
                let gf = if objective.age_to_encoder {
                    id.grad_features.add_scaled(&age.grad_features, lambda)?
                } else {
                    id.grad_features
                };
                let gh = if objective.train_age_head {
                    (lambda * age.grad_age_head.0, lambda * age.grad_age_head.1)
                } else {
                    (0.0, 0.0)
                };
                (
                    LossBreakdown {
                        total: id.value + lambda * age.value,
                        identity: id.value,
                        age: age.value,
                    },
                    gf,
                    id.grad_weights,
                    gh,
                )
            }
        };

        let (grad_encoder, _) = self.encoder.backward_cached(&cache, &grad_features)?;
        Ok((
            breakdown,
            ModelGrads {
                encoder: grad_encoder,
                classifier: grad_classifier,
                head: grad_head,
            },
            batch.features,
        ))
    }

    /// One optimizer step; class weights are re-projected onto the unit
    /// sphere afterwards when `renormalize` is set.
    pub fn apply(&mut self, grads: &ModelGrads, sgd: &mut Sgd, lr: f64, renormalize: bool) -> Result<()> {
        let head_grad = [grads.head.0, grads.head.1];
        let mut head = [self.head.slope, self.head.intercept];
        {
            let mut params = self.encoder.params.slices_mut();
            params.push(self.classifier.weights_mut().data_mut());
            params.push(&mut head);
            let mut g = grads.encoder.slices();
            g.push(grads.classifier.data());
            g.push(&head_grad);
            sgd.step(&mut params, &g, lr);
        }
        self.head = AgeHead {
            slope: head[0],
            intercept: head[1],
        };
        if renormalize {
            self.classifier.renormalize()?;
        }
        Ok(())
    }

    /// Predicted class per input row under the given mode's decision rule.
    pub fn predict(&self, inputs: &Matrix, mode: LossMode) -> Result<Vec<usize>> {
        let emb = self.encoder.forward(inputs)?;
        Ok(match mode {
            LossMode::Softmax => predict_linear(&emb, &self.classifier),
            _ => predict_angular(&emb, &self.classifier),
        })
    }

    pub fn accuracy(&self, data: &TrainingSet, mode: LossMode) -> Result<f64> {
        let pred = self.predict(&data.inputs, mode)?;
        let correct = pred.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
        Ok(correct as f64 / data.labels.len().max(1) as f64)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub total_loss: f64,
    pub id_loss: f64,
    pub age_loss: f64,
    /// Fraction of samples classified correctly by the parameters in effect
    /// when their mini-batch was processed.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
}

/// Mini-batch SGD on the chosen objective.
///
/// Deterministic in `(data, spec, objective, cfg)`: initialization draws
/// from stream 0 of the seed, shuffling from stream 1. The last incomplete
/// mini-batch of each epoch is kept.
pub fn train(
    data: &TrainingSet,
    spec: &EncoderSpec,
    objective: &Objective,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    data.validate()?;
    cfg.validate()?;
    objective.validate()?;
    spec.validate()?;
    if spec.input_dim() != data.inputs.cols() {
        return Err(Error::Shape(format!(
            "encoder input width {} does not match dataset width {}",
            spec.input_dim(),
            data.inputs.cols()
        )));
    }

    let mut init_rng = RandomSource::with_stream(cfg.seed, 0);
    let mut model = Model::init(spec.clone(), data.num_classes, &mut init_rng)?;
    let mut shuffle_rng = RandomSource::with_stream(cfg.seed, 1);
    let mut sgd = Sgd::new(cfg.momentum);
    let renormalize = objective.mode.is_angular();

    let n = data.inputs.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step: u64 = 0;
    let mut metrics = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        shuffle_rng.shuffle(&mut order);
        let (mut total, mut id, mut age) = (0.0, 0.0, 0.0);
        let mut correct = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let inputs = data.inputs.select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let ages: Vec<f64> = chunk.iter().map(|&i| data.ages[i]).collect();

            let (loss, grads, embeddings) = model
                .loss_and_grads(&inputs, &labels, &ages, objective, step)
                .map_err(|e| match e {
                    Error::Numerical(msg) => Error::Numerical(format!("step {step}: {msg}")),
                    other => other,
                })?;
            if !(loss.total.is_finite() && loss.identity.is_finite() && loss.age.is_finite()) {
                return Err(Error::Numerical(format!(
                    "step {step}: total={} id={} age={}",
                    loss.total, loss.identity, loss.age
                )));
            }

            let pred = match objective.mode {
                LossMode::Softmax => predict_linear(&embeddings, &model.classifier),
                _ => predict_angular(&embeddings, &model.classifier),
            };
            correct += pred.iter().zip(&labels).filter(|(p, l)| p == l).count();
            let m = chunk.len() as f64;
            total += loss.total * m;
            id += loss.identity * m;
            age += loss.age * m;

            model.apply(&grads, &mut sgd, lr, renormalize)?;
            step += 1;
        }

        let nf = n as f64;
        metrics.push(EpochMetrics {
            epoch,
            lr,
            total_loss: total / nf,
            id_loss: id / nf,
            age_loss: age / nf,
            train_accuracy: correct as f64 / nf,
        });
    }

    let checkpoint = Checkpoint {
        format_version: FORMAT_VERSION,
        encoder: model.encoder.clone(),
        classifier: model.classifier.weights().clone(),
        age_head: model.head,
        loss_mode: objective.mode,
        margin: objective.margin,
        multi_task: objective.multi_task,
        step,
        rng: shuffle_rng.state(),
    };
    Ok(TrainOutcome {
        checkpoint,
        model,
        metrics,
    })
}
