use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::settings::{synthetic_spec, train_settings, TrainDefaults, GEN_KEYS, TRAIN_KEYS};
use super::{write_outputs, CommonArgs};
use crate::datagen::{
    generate, input_matrix, make_cross_age_split, make_pairs, read_dataset, read_pairs, read_split,
    write_dataset, write_pairs, write_split, CrossAgeSplit, SyntheticSample, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    distractor_rank1, identity_similarity, kfold_accuracy, rank1_identification, read_embeddings,
    roc_auc, write_embeddings, EmbeddingTable,
};
use crate::losses::{decompose, DEFAULT_EPS};
use crate::model::{load_checkpoint, train, EpochMetrics, TrainingSet};
use crate::numerics::Matrix;
use crate::textio::join_floats;

/// Generator defaults of `gen-data`: the cross-age benchmark setting.
pub fn gen_data_defaults() -> SyntheticSpec {
    SyntheticSpec {
        num_identities: 100,
        input_dim: 32,
        samples_per_identity: 20,
        age_range: (1.0, 5.0),
        age_effect: 2.0,
        noise_sigma: 0.1,
        seed: 0,
    }
}

const DEFAULT_PAIRS: usize = 200;

fn pair_capacity(samples: &[SyntheticSample]) -> (usize, usize) {
    let mut per_identity = BTreeMap::new();
    for s in samples {
        *per_identity.entry(s.identity).or_insert(0usize) += 1;
    }
    let choose2 = |n: usize| n * n.saturating_sub(1) / 2;
    let pos: usize = per_identity.values().map(|&n| choose2(n)).sum();
    (pos, choose2(samples.len()) - pos)
}

pub fn cmd_gen_data(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let mut allowed = GEN_KEYS.to_vec();
    allowed.extend(["test_fraction", "split_seed", "num_positive", "num_negative", "pair_seed"]);
    cfg.check_keys(&allowed)?;

    let spec = synthetic_spec(&cfg, &gen_data_defaults())?;
    let test_fraction: f64 = cfg.get("test_fraction", 0.5)?;
    let split_seed: u64 = cfg.get("split_seed", spec.seed)?;
    let pair_seed: u64 = cfg.get("pair_seed", spec.seed)?;

    let samples = generate(&spec)?;
    let split = make_cross_age_split(&samples, spec.age_range, test_fraction, split_seed)?;

    // verification pairs come from held-out identities when there are any
    let pool: Vec<usize> = if split.gallery.is_empty() {
        (0..samples.len()).collect()
    } else {
        let test_ids: Vec<usize> = split.gallery.iter().map(|&g| samples[g].identity).collect();
        (0..samples.len()).filter(|&i| test_ids.contains(&samples[i].identity)).collect()
    };
    let subset: Vec<SyntheticSample> = pool.iter().map(|&i| samples[i].clone()).collect();
    // unset pair counts default to 200 each, capped by what the pool holds
    let (avail_pos, avail_neg) = pair_capacity(&subset);
    let num_positive: usize = cfg.get("num_positive", avail_pos.min(DEFAULT_PAIRS))?;
    let num_negative: usize = cfg.get("num_negative", avail_neg.min(DEFAULT_PAIRS))?;
    let mut pairs = make_pairs(&subset, num_positive, num_negative, pair_seed)?;
    for p in &mut pairs {
        p.a = pool[p.a];
        p.b = pool[p.b];
    }

    write_outputs(
        &args.out,
        &[
            ("dataset.txt", write_dataset(&samples)),
            ("split.txt", write_split(&split)),
            ("pairs.txt", write_pairs(&pairs)),
        ],
    )?;
    println!(
        "samples={} identities={} train={} gallery={} probe={} pairs={}",
        samples.len(),
        spec.num_identities,
        split.train.len(),
        split.gallery.len(),
        split.probe.len(),
        pairs.len()
    );
    Ok(())
}

/// Training rows of `samples` (all of them, or the split's training part)
/// with identities remapped to dense class indices in ascending order.
pub fn training_set(samples: &[SyntheticSample], split: Option<&CrossAgeSplit>) -> Result<TrainingSet> {
    let rows: Vec<usize> = match split {
        Some(s) => s.train.clone(),
        None => (0..samples.len()).collect(),
    };
    if let Some(&bad) = rows.iter().find(|&&i| i >= samples.len()) {
        return Err(Error::config("split", format!("index {bad} beyond {} samples", samples.len())));
    }
    let mut ids: Vec<usize> = rows.iter().map(|&i| samples[i].identity).collect();
    ids.sort_unstable();
    ids.dedup();
    let chosen: Vec<SyntheticSample> = rows.iter().map(|&i| samples[i].clone()).collect();
    Ok(TrainingSet {
        inputs: input_matrix(&chosen)?,
        labels: chosen
            .iter()
            .map(|s| ids.binary_search(&s.identity).expect("identity collected above"))
            .collect(),
        ages: chosen.iter().map(|s| s.age).collect(),
        num_classes: ids.len(),
    })
}

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,lr,total_loss,id_loss,age_loss,train_accuracy\n");
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            m.epoch, m.lr, m.total_loss, m.id_loss, m.age_loss, m.train_accuracy
        )
        .unwrap();
    }
    out
}

pub fn cmd_train(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let mut allowed = TRAIN_KEYS.to_vec();
    allowed.extend(["dataset", "split"]);
    cfg.check_keys(&allowed)?;

    let dataset_path = cfg.input_path("dataset")?;
    let split_path = cfg.optional_input_path("split")?;
    let samples = read_dataset(&dataset_path)?;
    let split = split_path.as_deref().map(read_split).transpose()?;
    let data = training_set(&samples, split.as_ref())?;
    let (spec, objective, train_cfg) =
        train_settings(&cfg, data.inputs.cols(), data.inputs.rows(), &TrainDefaults::TRAIN)?;

    let outcome = train(&data, &spec, &objective, &train_cfg)?;
    write_outputs(
        &args.out,
        &[
            ("checkpoint.json", outcome.checkpoint.to_json()),
            ("metrics.csv", metrics_csv(&outcome.metrics)),
        ],
    )?;
    match outcome.metrics.last() {
        Some(m) => println!(
            "mode={} epochs={} final_loss={} train_accuracy={}",
            objective.mode.name(),
            outcome.metrics.len(),
            m.total_loss,
            m.train_accuracy
        ),
        None => println!("mode={} epochs=0 (initialization only)", objective.mode.name()),
    }
    Ok(())
}

fn decomposed_tsv(ids: &[usize], ages: &[f64], embeddings: &Matrix) -> Result<String> {
    let mut out = String::from("identity\tage\tnorm\tdirection\n");
    for ((id, age), row) in ids.iter().zip(ages).zip(embeddings.iter_rows()) {
        let d = decompose(row, DEFAULT_EPS)?;
        if d.degenerate {
            return Err(Error::Numerical(format!("zero embedding for identity {id}")));
        }
        writeln!(out, "{id}\t{age}\t{}\t{}", d.norm, join_floats(&d.direction)).unwrap();
    }
    Ok(out)
}

pub fn cmd_embed(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    cfg.check_keys(&["checkpoint", "dataset", "split", "subset", "name"])?;
    let ckpt_path = cfg.input_path("checkpoint")?;
    let dataset_path = cfg.input_path("dataset")?;
    let split_path = cfg.optional_input_path("split")?;
    let subset = cfg.raw("subset").unwrap_or("all").to_string();
    let name = cfg.raw("name").unwrap_or("embeddings").to_string();
    if subset != "all" && split_path.is_none() {
        return Err(Error::config("subset", format!("subset `{subset}` needs a split file")));
    }

    let ckpt = load_checkpoint(&ckpt_path)?;
    let model = ckpt.model()?;
    let samples = read_dataset(&dataset_path)?;
    let rows: Vec<usize> = match (subset.as_str(), split_path) {
        ("all", _) => (0..samples.len()).collect(),
        (role, Some(p)) => {
            let split = read_split(&p)?;
            match role {
                "train" => split.train,
                "gallery" => split.gallery,
                "probe" => split.probe,
                other => {
                    return Err(Error::config(
                        "subset",
                        format!("expected all, train, gallery or probe, got `{other}`"),
                    ))
                }
            }
        }
        _ => unreachable!("checked above"),
    };
    if let Some(&bad) = rows.iter().find(|&&i| i >= samples.len()) {
        return Err(Error::config("split", format!("index {bad} beyond {} samples", samples.len())));
    }
    let chosen: Vec<SyntheticSample> = rows.iter().map(|&i| samples[i].clone()).collect();
    let inputs = input_matrix(&chosen)?;
    if inputs.cols() != model.encoder.spec.input_dim() && !chosen.is_empty() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} input columns, dataset has {}",
            model.encoder.spec.input_dim(),
            inputs.cols()
        )));
    }
    let embeddings = if chosen.is_empty() {
        Matrix::zeros(0, model.encoder.spec.output_dim())
    } else {
        model.encoder.forward(&inputs)?
    };
    let ids: Vec<usize> = chosen.iter().map(|s| s.identity).collect();
    let ages: Vec<f64> = chosen.iter().map(|s| s.age).collect();
    let decomposed = decomposed_tsv(&ids, &ages, &embeddings)?;
    let table = EmbeddingTable {
        identities: ids.iter().map(|&i| Some(i)).collect(),
        embeddings,
    };
    write_outputs(
        &args.out,
        &[
            (&format!("{name}.txt"), write_embeddings(&table)),
            (&format!("{name}.decomposed.tsv"), decomposed),
        ],
    )?;
    println!("embedded {} samples into {}-d", ids.len(), table.embeddings.cols());
    Ok(())
}

fn pair_scores(table: &EmbeddingTable, pairs: &[crate::datagen::Pair]) -> Result<Vec<(f64, bool)>> {
    let n = table.embeddings.rows();
    pairs
        .iter()
        .map(|p| {
            if p.a >= n || p.b >= n {
                return Err(Error::config(
                    "pairs",
                    format!("pair ({}, {}) indexes beyond {n} embeddings", p.a, p.b),
                ));
            }
            Ok((identity_similarity(table.embeddings.row(p.a), table.embeddings.row(p.b))?, p.same))
        })
        .collect()
}

pub fn cmd_eval(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    cfg.check_keys(&["protocol", "gallery", "probe", "distractors", "embeddings", "pairs", "folds", "name", "seed"])?;
    let protocol = cfg
        .raw("protocol")
        .ok_or_else(|| Error::config("protocol", "required: rank1, distractor_rank1, roc or kfold"))?
        .to_string();
    let name = cfg.raw("name").unwrap_or("report").to_string();
    let mut echo = BTreeMap::new();

    let (report, headline) = match protocol.as_str() {
        "rank1" | "distractor_rank1" => {
            let gallery_path = cfg.input_path("gallery")?;
            let probe_path = cfg.input_path("probe")?;
            let extra_path = cfg.optional_input_path("distractors")?;
            if protocol == "rank1" && extra_path.is_some() {
                return Err(Error::config("distractors", "only used by distractor_rank1"));
            }
            let gallery_table = read_embeddings(&gallery_path)?;
            let probe_table = read_embeddings(&probe_path)?;
            if probe_table.num_distractors() > 0 {
                return Err(Error::config("probe", "probe rows must carry identities"));
            }
            let gallery = gallery_table.labeled();
            let probe = probe_table.labeled();
            echo.insert("gallery".to_string(), gallery_path.display().to_string());
            echo.insert("probe".to_string(), probe_path.display().to_string());
            let report = if protocol == "rank1" {
                if gallery_table.num_distractors() > 0 {
                    return Err(Error::config("gallery", "rank1 gallery has distractor rows; use distractor_rank1"));
                }
                rank1_identification(&gallery, &probe)?
            } else {
                let mut distractors = gallery_table.distractors();
                if let Some(p) = extra_path {
                    let extra = read_embeddings(&p)?;
                    echo.insert("distractors".to_string(), p.display().to_string());
                    let mut data = distractors.into_data();
                    data.extend_from_slice(extra.embeddings.data());
                    let cols = gallery.embeddings.cols();
                    if extra.embeddings.rows() > 0 && extra.embeddings.cols() != cols {
                        return Err(Error::Shape(format!(
                            "distractor width {} differs from gallery width {cols}",
                            extra.embeddings.cols()
                        )));
                    }
                    distractors = Matrix::new(data.len() / cols.max(1), cols, data)?;
                }
                distractor_rank1(&gallery, &distractors, &probe)?
            };
            let rate = report.metric("rank1").unwrap_or(0.0);
            (report, format!("rank1={rate}"))
        }
        "roc" | "kfold" => {
            let emb_path = cfg.input_path("embeddings")?;
            let pairs_path = cfg.input_path("pairs")?;
            let table = read_embeddings(&emb_path)?;
            let pairs = read_pairs(&pairs_path)?;
            let scores = pair_scores(&table, &pairs)?;
            echo.insert("embeddings".to_string(), emb_path.display().to_string());
            echo.insert("pairs".to_string(), pairs_path.display().to_string());
            if protocol == "roc" {
                let roc = roc_auc(&scores)?;
                let mut report = crate::eval::EvalReport::new("roc");
                report.metrics.insert("auc".into(), roc.auc);
                report.counts.insert("pairs".into(), scores.len());
                report.counts.insert("positive".into(), scores.iter().filter(|s| s.1).count());
                report.counts.insert("negative".into(), scores.iter().filter(|s| !s.1).count());
                report.roc = Some(roc.points);
                (report, format!("auc={}", roc.auc))
            } else {
                let folds: usize = cfg.get("folds", 10)?;
                echo.insert("folds".to_string(), folds.to_string());
                let report = kfold_accuracy(&scores, folds)?;
                let acc = report.metric("accuracy").unwrap_or(0.0);
                (report, format!("accuracy={acc}"))
            }
        }
        other => {
            return Err(Error::config(
                "protocol",
                format!("expected rank1, distractor_rank1, roc or kfold, got `{other}`"),
            ))
        }
    };
    let mut report = report;
    report.config = echo;
    write_outputs(&args.out, &[(&format!("{name}.json"), report.to_json())])?;
    println!("{protocol}: {headline}");
    Ok(())
}
