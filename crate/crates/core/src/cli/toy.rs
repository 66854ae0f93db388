use std::fmt::Write as _;

use super::commands::training_set;
use super::settings::{synthetic_spec, train_settings, TrainDefaults, GEN_KEYS, TRAIN_KEYS};
use super::{write_outputs, CommonArgs};
use crate::datagen::{generate, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{train, LossMode};
use crate::numerics::row_norms;

const TOY_DATA: SyntheticSpec = SyntheticSpec {
    num_identities: 10,
    input_dim: 16,
    samples_per_identity: 60,
    age_range: (1.0, 5.0),
    age_effect: 1.0,
    noise_sigma: 0.1,
    seed: 0,
};

const TOY_TRAIN: TrainDefaults = TrainDefaults {
    mode: LossMode::Oe,
    hidden_widths: &[32],
    embedding_dim: 2,
    batch_size: 32,
    epochs: 60,
    learning_rate: 0.003,
    momentum: 0.9,
    anneal_weight: 5.0,
    lambda: 1.0,
    train_age_head: false,
};

/// Per-mode line of the toy summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModeSummary {
    pub mode: LossMode,
    pub train_accuracy: f64,
    pub norm_age_correlation: f64,
}

/// Pearson correlation of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Shape(format!("pearson needs two equal samples of length >= 2, got {} and {}", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("pearson correlation of a constant sample".into()));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Trains the three objectives on a small synthetic set with a 2-d
/// embedding and a frozen age map `f(r) = r`, writing one scatter file per
/// mode plus `summary.tsv`.
pub fn cmd_toy_fig3(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let allowed: Vec<&str> = GEN_KEYS
        .iter()
        .chain(TRAIN_KEYS)
        .copied()
        .filter(|k| !matches!(*k, "mode" | "embedding_dim" | "train_age_head"))
        .collect();
    cfg.check_keys(&allowed)?;

    let spec = synthetic_spec(&cfg, &TOY_DATA)?;
    let samples = generate(&spec)?;
    let data = training_set(&samples, None)?;

    let mut runs = Vec::new();
    for mode in [LossMode::Softmax, LossMode::ASoftmax, LossMode::Oe] {
        let (enc, mut objective, train_cfg) =
            train_settings(&cfg, data.inputs.cols(), data.inputs.rows(), &TOY_TRAIN)?;
        objective.mode = mode;
        objective.train_age_head = false;
        runs.push((enc, objective, train_cfg));
    }

    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (enc, objective, train_cfg) in &runs {
        let outcome = train(&data, enc, objective, train_cfg)?;
        let embeddings = outcome.model.encoder.forward(&data.inputs)?;
        let norms = row_norms(&embeddings);
        let mut scatter = String::from("x\ty\tidentity\tage\tnorm\n");
        for (i, s) in samples.iter().enumerate() {
            let row = embeddings.row(i);
            writeln!(scatter, "{}\t{}\t{}\t{}\t{}", row[0], row[1], s.identity, s.age, norms[i]).unwrap();
        }
        files.push((format!("scatter_{}.tsv", objective.mode.name()), scatter));
        summaries.push(ToyModeSummary {
            mode: objective.mode,
            train_accuracy: outcome.model.accuracy(&data, objective.mode)?,
            norm_age_correlation: pearson(&norms, &data.ages)?,
        });
    }

    let mut summary = String::from("mode\ttrain_accuracy\tnorm_age_correlation\n");
    for s in &summaries {
        writeln!(summary, "{}\t{}\t{}", s.mode.name(), s.train_accuracy, s.norm_age_correlation).unwrap();
    }
    files.push(("summary.tsv".to_string(), summary.clone()));
    let borrowed: Vec<(&str, String)> = files.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    write_outputs(&args.out, &borrowed)?;
    print!("{summary}");
    Ok(())
}
