//! Acceptance criteria 1-9. Each test prints one `criterion N: PASS|FAIL` line.

use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use oefd_core::cli::{run_grad_check_matrix, GRAD_CHECK_TOLERANCE};
use oefd_core::eval::{kfold_accuracy, rank1_identification, roc_auc, EmbeddingSet};
use oefd_core::losses::{
    age_loss, combined_loss, decompose, identity_loss, psi, recompose, AgeHead, AngularClassifier,
    AngularMarginConfig, LabeledBatch, MultiTaskConfig, DEFAULT_EPS,
};
use oefd_core::numerics::{norm, Matrix, RandomSource};

const GRAD_CHECK_BUDGET: Duration = Duration::from_secs(30);
const PSI_TOL: f64 = 1e-12;
const PSI_BUDGET: Duration = Duration::from_secs(1);
const PSI_GRID: usize = 10_000;
const REDUCTION_TOL: f64 = 1e-10;
const REDUCTION_BATCHES: usize = 100;
const INVARIANCE_TOL: f64 = 1e-12;
const ROUND_TRIP_REL_TOL: f64 = 1e-9;
const UNIT_NORM_TOL: f64 = 1e-12;
const TOY_BUDGET: Duration = Duration::from_secs(60);
const TOY_MIN_ACCURACY: f64 = 0.95;
const TOY_MIN_CORRELATION: f64 = 0.8;
const AUC_TOL: f64 = 1e-12;
const CROSS_AGE_SEEDS: u64 = 10;
const CROSS_AGE_BUDGET: Duration = Duration::from_secs(600);

fn verdict(n: u32, ok: bool, detail: &str) {
    // straight to the handle so the line shows even when output is captured
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {n} failed: {detail}");
}

fn oefd(args: &[&str]) -> String {
    oefd_in(Path::new("."), args)
}

fn oefd_in(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_oefd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn oefd");
    assert!(
        out.status.success(),
        "oefd {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn random_matrix(rng: &mut RandomSource, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| scale * rng.gaussian()).collect()).unwrap()
}

fn random_batch(rng: &mut RandomSource, rows: usize, dim: usize, classes: usize) -> LabeledBatch {
    let features = random_matrix(rng, rows, dim, 2.0);
    let labels = (0..rows).map(|_| rng.index(classes)).collect();
    let ages = (0..rows).map(|_| rng.uniform_in(1.0, 5.0)).collect();
    LabeledBatch::new(features, labels, ages).unwrap()
}

#[test]
fn criterion_1_gradient_oracle() {
    let start = Instant::now();
    let records = run_grad_check_matrix(0, false).unwrap();
    let elapsed = start.elapsed();
    let worst = records.iter().map(|r| r.worst()).fold(0.0, f64::max);
    let spans = ["m=1", "m=2", "m=4", "s=1 ", "s=32", "lambda=0 ", "lambda=0.01", "lambda=1"]
        .iter()
        .all(|tag| records.iter().any(|r| format!("{} ", r.name).contains(tag)));
    let control = run_grad_check_matrix(0, true).unwrap();
    let ok = records.len() >= 20
        && records.iter().all(|r| r.passed())
        && spans
        && records.iter().any(|r| r.name.starts_with("encoder"))
        && control.iter().all(|r| !r.passed())
        && elapsed < GRAD_CHECK_BUDGET;
    verdict(
        1,
        ok,
        &format!(
            "{} configs, worst rel error {worst:.2e} < {GRAD_CHECK_TOLERANCE:e}, corrupted control fails, {:.2}s",
            records.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_psi_suite() {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_boundary: f64 = 0.0;
    for m in [2u32, 3, 4] {
        for k in 1..m {
            let b = k as f64 * PI / m as f64;
            let expected = 1.0 - 2.0 * k as f64;
            for theta in [b.next_down(), b, b.next_up()] {
                worst_boundary = worst_boundary.max((psi(theta, m).unwrap() - expected).abs());
            }
        }
    }
    ok &= worst_boundary <= PSI_TOL;

    let grid: Vec<f64> = (0..PSI_GRID).map(|i| PI * i as f64 / (PSI_GRID - 1) as f64).collect();
    for m in [2u32, 4] {
        let values: Vec<f64> = grid.iter().map(|&t| psi(t, m).unwrap()).collect();
        ok &= values.windows(2).all(|w| w[1] < w[0]);
        ok &= values[0] == 1.0;
        ok &= grid.iter().zip(&values).skip(1).all(|(t, v)| *v < t.cos());
    }
    let worst_m1 = grid.iter().map(|&t| (psi(t, 1).unwrap() - t.cos()).abs()).fold(0.0, f64::max);
    ok &= worst_m1 <= PSI_TOL;
    let elapsed = start.elapsed();
    ok &= elapsed < PSI_BUDGET;
    verdict(
        2,
        ok,
        &format!(
            "boundary error {worst_boundary:.1e}, m=1 deviation {worst_m1:.1e}, strict decrease and psi < cos on {PSI_GRID} points, {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
}

/// Scaled normalized-softmax cross-entropy written out directly.
fn normalized_softmax_oracle(batch: &LabeledBatch, weights: &Matrix, s: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..batch.len() {
        let x = batch.features.row(i);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let logits: Vec<f64> = (0..weights.rows())
            .map(|j| {
                let w = weights.row(j);
                let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                let d: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
                s * d / (nx * nw)
            })
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        total += lse - logits[batch.identity_labels[i]];
    }
    total / batch.len() as f64
}

#[test]
fn criterion_3_m1_reduces_to_normalized_softmax() {
    let mut rng = RandomSource::new(3);
    let mut worst: f64 = 0.0;
    for b in 0..REDUCTION_BATCHES {
        let classes = 2 + b % 7;
        let (rows, dim) = (1 + rng.index(16), 2 + rng.index(10));
        let batch = random_batch(&mut rng, rows, dim, classes);
        let weights = random_matrix(&mut rng, classes, batch.features.cols(), 1.0);
        let s = [1.0, 8.0, 32.0, 64.0][b % 4];
        let cfg = AngularMarginConfig { m: 1, s, ..Default::default() };
        let ours = identity_loss(&batch, &AngularClassifier::unconstrained(weights.clone()), &cfg)
            .unwrap()
            .value;
        worst = worst.max((ours - normalized_softmax_oracle(&batch, &weights, s)).abs());
    }
    verdict(3, worst <= REDUCTION_TOL, &format!("{REDUCTION_BATCHES} batches, max |diff| {worst:.2e}"));
}

fn random_rotation(rng: &mut RandomSource, dim: usize) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Matrix::from_rows(&basis).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_4_orthogonality_contracts() {
    let mut rng = RandomSource::new(4);
    let (mut scale_err, mut rot_err, mut add_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for trial in 0..50 {
        let classes = 5;
        let batch = random_batch(&mut rng, 12, 6, classes);
        let clf = AngularClassifier::random(classes, 6, &mut rng);
        let margin = AngularMarginConfig {
            m: [1, 2, 4][trial % 3],
            s: [1.0, 32.0][trial % 2],
            anneal_weight: [0.0, 3.0][(trial / 2) % 2],
            anneal_decay: 1.0,
        };
        let head = AgeHead { slope: rng.uniform_in(0.5, 2.0), intercept: rng.uniform_in(-1.0, 1.0) };

        let mut scaled = batch.clone();
        for i in 0..scaled.len() {
            let f = rng.uniform_in(0.01, 100.0);
            scaled.features.row_mut(i).iter_mut().for_each(|v| *v *= f);
        }
        let a = identity_loss(&batch, &clf, &margin).unwrap().value;
        let b = identity_loss(&scaled, &clf, &margin).unwrap().value;
        scale_err = scale_err.max((a - b).abs());

        let mut rotated = batch.clone();
        rotated.features = batch.features.matmul(&random_rotation(&mut rng, 6)).unwrap();
        let a = age_loss(&batch, &head).unwrap().value;
        let b = age_loss(&rotated, &head).unwrap().value;
        rot_err = rot_err.max((a - b).abs());

        let lambda = [0.0, 0.01, 1.0, 7.5][trial % 4];
        let joint = combined_loss(&batch, &clf, &head, &margin, &MultiTaskConfig { lambda }).unwrap();
        let id = identity_loss(&batch, &clf, &margin).unwrap();
        let age = age_loss(&batch, &head).unwrap();
        let expect_f: Vec<f64> = id
            .grad_features
            .data()
            .iter()
            .zip(age.grad_features.data())
            .map(|(x, y)| x + lambda * y)
            .collect();
        add_err = add_err
            .max(max_abs_diff(joint.grad_features.data(), &expect_f))
            .max(max_abs_diff(joint.grad_weights.data(), id.grad_weights.data()))
            .max((joint.grad_age_head.0 - lambda * age.grad_age_head.0).abs())
            .max((joint.grad_age_head.1 - lambda * age.grad_age_head.1).abs())
            .max((joint.value - id.value - lambda * age.value).abs());
    }
    let ok = scale_err <= INVARIANCE_TOL && rot_err <= INVARIANCE_TOL && add_err <= INVARIANCE_TOL;
    verdict(
        4,
        ok,
        &format!("rescale {scale_err:.1e}, rotation {rot_err:.1e}, additivity {add_err:.1e}"),
    );
}

#[test]
fn criterion_5_decomposition_round_trip() {
    let mut rng = RandomSource::new(5);
    let (mut worst_rel, mut worst_unit): (f64, f64) = (0.0, 0.0);
    for i in 0..1000 {
        let dim = 1 + i % 64;
        let scale = 10f64.powf(rng.uniform_in(-6.0, 6.0));
        let x: Vec<f64> = (0..dim).map(|_| scale * rng.gaussian()).collect();
        let d = decompose(&x, DEFAULT_EPS).unwrap();
        let back = recompose(&d);
        let diff: Vec<f64> = x.iter().zip(&back).map(|(a, b)| a - b).collect();
        worst_rel = worst_rel.max(norm(&diff) / norm(&x));
        worst_unit = worst_unit.max((norm(&d.direction) - 1.0).abs());
    }
    let ok = worst_rel <= ROUND_TRIP_REL_TOL && worst_unit <= UNIT_NORM_TOL;
    verdict(5, ok, &format!("1000 vectors, rel error {worst_rel:.1e}, |‖dir‖-1| {worst_unit:.1e}"));
}

#[test]
fn criterion_6_toy_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    oefd(&["toy-fig3", "--out", p(dir.path())]);
    let elapsed = start.elapsed();
    let summary = fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
    let mut rows = std::collections::BTreeMap::new();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        rows.insert(f[0].to_string(), (f[1].parse::<f64>().unwrap(), f[2].parse::<f64>().unwrap()));
    }
    let (acc, corr) = rows["oe"];
    let files = ["scatter_softmax.tsv", "scatter_a_softmax.tsv", "scatter_oe.tsv"];
    let ok = files.iter().all(|f| dir.path().join(f).is_file())
        && acc >= TOY_MIN_ACCURACY
        && corr >= TOY_MIN_CORRELATION
        && elapsed < TOY_BUDGET;
    verdict(
        6,
        ok,
        &format!(
            "oe accuracy {acc:.4}, norm-age r {corr:.4}; softmax r {:.4}, a_softmax r {:.4}; {:.1}s",
            rows["softmax"].1,
            rows["a_softmax"].1,
            elapsed.as_secs_f64()
        ),
    );
}

fn mann_whitney(scores: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut total = 0.0;
    for &(sp, _) in scores.iter().filter(|s| s.1) {
        for &(sn, _) in scores.iter().filter(|s| !s.1) {
            total += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / total
}

fn train_accuracy(scores: &[(f64, bool)], t: f64) -> usize {
    scores.iter().filter(|(s, same)| (*s >= t) == *same).count()
}

/// Per fold: best achievable training accuracy over every threshold that can
/// matter (each score, just above each score, and both infinities), then the
/// mean held-out accuracy at the fold's reported threshold.
fn kfold_sweep_check(scores: &[(f64, bool)], folds: usize) -> bool {
    let report = kfold_accuracy(scores, folds).unwrap();
    let n = scores.len();
    let mut held_out = 0.0;
    for (i, fold) in report.folds.iter().enumerate() {
        let (lo, hi) = (i * n / folds, (i + 1) * n / folds);
        let train: Vec<(f64, bool)> = scores[..lo].iter().chain(&scores[hi..]).cloned().collect();
        let test = &scores[lo..hi];
        let mut candidates = vec![f64::NEG_INFINITY, f64::INFINITY];
        for &(s, _) in &train {
            candidates.push(s);
            candidates.push(s.next_up());
        }
        let best = candidates.iter().map(|&t| train_accuracy(&train, t)).max().unwrap();
        if train_accuracy(&train, fold.threshold) != best {
            return false;
        }
        let acc = train_accuracy(test, fold.threshold) as f64 / test.len() as f64;
        if acc != fold.accuracy {
            return false;
        }
        held_out += acc;
    }
    (held_out / folds as f64 - report.metric("accuracy").unwrap()).abs() < 1e-15
}

#[test]
fn criterion_7_protocol_oracles() {
    let mut rng = RandomSource::new(7);
    let mut worst_auc: f64 = 0.0;
    for trial in 0..200 {
        let n = 2 + rng.index(199);
        let mut scores: Vec<(f64, bool)> = (0..n)
            .map(|_| ((rng.uniform() * 20.0).round() / 20.0, rng.uniform() < 0.5))
            .collect();
        scores[0].1 = true;
        scores[1].1 = false;
        if trial % 2 == 0 {
            scores.iter_mut().for_each(|s| s.0 += 1e-3 * rng.gaussian());
        }
        let auc = roc_auc(&scores).unwrap().auc;
        worst_auc = worst_auc.max((auc - mann_whitney(&scores)).abs());
    }
    let fixture = [(0.9, true), (0.8, false), (0.7, true), (0.1, false)];
    let fixture_auc = roc_auc(&fixture).unwrap().auc;

    let hand: [&[(f64, bool)]; 3] = [
        &fixture,
        &[(0.2, true), (0.9, true), (0.4, false), (0.6, false), (0.8, true), (0.1, false)],
        &[(0.5, true), (0.5, false), (0.3, true), (0.7, false), (0.5, true), (0.9, true), (0.1, false), (0.6, false)],
    ];
    let mut kfold_ok = true;
    for f in hand {
        for folds in 2..=f.len() / 2 {
            kfold_ok &= kfold_sweep_check(f, folds);
        }
    }
    for _ in 0..50 {
        let n = 10 + rng.index(60);
        let s: Vec<(f64, bool)> = (0..n).map(|_| ((rng.uniform() * 10.0).round(), rng.uniform() < 0.5)).collect();
        kfold_ok &= kfold_sweep_check(&s, 2 + rng.index(5));
    }

    let mut rank_ok = true;
    for _ in 0..20 {
        let ids: Vec<usize> = (0..15).collect();
        let gallery = random_matrix(&mut rng, 15, 4, 1.0);
        let probe = gallery.add_scaled(&random_matrix(&mut rng, 15, 4, 1.0), 0.8).unwrap();
        let rescale = |m: &Matrix, rng: &mut RandomSource| {
            let mut out = m.clone();
            for i in 0..out.rows() {
                let f = rng.uniform_in(0.01, 100.0);
                out.row_mut(i).iter_mut().for_each(|v| *v *= f);
            }
            out
        };
        let a = rank1_identification(
            &EmbeddingSet::new(gallery.clone(), ids.clone()).unwrap(),
            &EmbeddingSet::new(probe.clone(), ids.clone()).unwrap(),
        )
        .unwrap();
        let b = rank1_identification(
            &EmbeddingSet::new(rescale(&gallery, &mut rng), ids.clone()).unwrap(),
            &EmbeddingSet::new(rescale(&probe, &mut rng), ids.clone()).unwrap(),
        )
        .unwrap();
        rank_ok &= a.counts == b.counts && a.metric("rank1") == b.metric("rank1");
    }

    let ok = worst_auc <= AUC_TOL && fixture_auc == 0.75 && kfold_ok && rank_ok;
    verdict(
        7,
        ok,
        &format!(
            "AUC vs Mann-Whitney {worst_auc:.1e}, fixture AUC {fixture_auc}, kfold sweep {kfold_ok}, rank-1 rescale {rank_ok}"
        ),
    );
}

/// gen-data, train, embed gallery and probe, rank-1 eval; run inside `root`
/// with relative paths so reruns in other directories see the same config.
fn pipeline(root: &Path, seed: &str, lambda: &str) -> f64 {
    fs::create_dir_all(root).unwrap();
    let run = format!("run-{lambda}");
    if !root.join("data/dataset.txt").exists() {
        oefd_in(root, &["gen-data", "--seed", seed, "--out", "data"]);
    }
    let (ds, sp) = ("dataset=data/dataset.txt", "split=data/split.txt");
    oefd_in(root, &["train", "--seed", seed, "--out", &run, "--set", ds, "--set", sp, "--set", &format!("lambda={lambda}")]);
    let ck = format!("checkpoint={run}/checkpoint.json");
    for sub in ["gallery", "probe"] {
        oefd_in(root, &["embed", "--out", &run, "--set", &ck, "--set", ds, "--set", sp, "--set", &format!("subset={sub}"), "--set", &format!("name={sub}")]);
    }
    oefd_in(root, &[
        "eval", "--out", &run, "--set", "protocol=rank1",
        "--set", &format!("gallery={run}/gallery.txt"),
        "--set", &format!("probe={run}/probe.txt"),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join(&run).join("report.json")).unwrap()).unwrap();
    report["metrics"]["rank1"].as_f64().unwrap()
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    pipeline(&a, "11", "0.01");
    pipeline(&b, "11", "0.01");
    let mut compared = 0;
    let mut identical = true;
    for sub in ["data", "run-0.01"] {
        let mut names: Vec<_> = fs::read_dir(a.join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            let x = fs::read(a.join(sub).join(&name)).unwrap();
            let y = fs::read(b.join(sub).join(&name)).unwrap();
            identical &= x == y;
            compared += 1;
        }
    }
    verdict(8, identical && compared >= 10, &format!("{compared} files byte-identical across reruns: {identical}"));
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn criterion_9_cross_age_benefit() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (mut oe, mut plain) = (Vec::new(), Vec::new());
    for seed in 0..CROSS_AGE_SEEDS {
        let root = tmp.path().join(seed.to_string());
        oe.push(pipeline(&root, &seed.to_string(), "0.01"));
        plain.push(pipeline(&root, &seed.to_string(), "0"));
    }
    let elapsed = start.elapsed();
    let (m_oe, m_plain) = (median(&mut oe.clone()), median(&mut plain.clone()));
    let ok = m_oe >= m_plain && elapsed < CROSS_AGE_BUDGET;
    verdict(
        9,
        ok,
        &format!(
            "median rank-1 lambda=0.01 {m_oe:.3} vs lambda=0 {m_plain:.3} over {CROSS_AGE_SEEDS} seeds; per seed {oe:?} vs {plain:?}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}
