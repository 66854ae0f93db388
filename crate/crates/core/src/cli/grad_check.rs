use std::fmt::Write as _;

use super::{write_outputs, CommonArgs};
use crate::error::{Error, Result};
use crate::losses::{
    age_loss, combined_loss, identity_loss, AgeHead, AngularClassifier, AngularMarginConfig,
    LabeledBatch, LossResult, MultiTaskConfig,
};
use crate::model::{Activation, EncoderSpec, LossMode, Model, Objective};
use crate::numerics::{finite_difference_gradient, relative_error, Matrix, RandomSource, DEFAULT_FD_STEP};

/// Largest accepted relative error between analytic and numerical gradients.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

const ERROR_FLOOR: f64 = 1e-8;

/// Outcome of one gradient-check configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRecord {
    pub name: String,
    /// `(block, relative error)` for every checked parameter block.
    pub blocks: Vec<(String, f64)>,
}

impl GradCheckRecord {
    pub fn worst(&self) -> f64 {
        self.blocks.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.1 < GRAD_CHECK_TOLERANCE)
    }
}

struct LossCase {
    batch: LabeledBatch,
    classifier: AngularClassifier,
    head: AgeHead,
}

fn loss_case(seed: u64) -> Result<LossCase> {
    let mut rng = RandomSource::new(seed);
    let (rows, dim, classes) = (6, 5, 4);
    let features: Vec<f64> = (0..rows * dim).map(|_| 1.5 * rng.gaussian()).collect();
    let labels: Vec<usize> = (0..rows).map(|_| rng.index(classes)).collect();
    let ages: Vec<f64> = (0..rows).map(|_| rng.uniform_in(1.0, 5.0)).collect();
    // class weights deliberately off the unit sphere
    let weights: Vec<f64> = (0..classes * dim).map(|_| rng.gaussian()).collect();
    Ok(LossCase {
        batch: LabeledBatch::new(Matrix::new(rows, dim, features)?, labels, ages)?,
        classifier: AngularClassifier::unconstrained(Matrix::new(classes, dim, weights)?),
        head: AgeHead {
            slope: rng.uniform_in(0.5, 1.5),
            intercept: rng.uniform_in(-0.5, 0.5),
        },
    })
}

/// Which loss of the joint objective a check targets.
#[derive(Debug, Clone, Copy)]
enum Part {
    Identity,
    Age,
    Combined,
}

fn eval_part(
    part: Part,
    batch: &LabeledBatch,
    clf: &AngularClassifier,
    head: &AgeHead,
    margin: &AngularMarginConfig,
    lambda: f64,
) -> Result<LossResult> {
    match part {
        Part::Identity => identity_loss(batch, clf, margin),
        Part::Age => age_loss(batch, head),
        Part::Combined => combined_loss(batch, clf, head, margin, &MultiTaskConfig { lambda }),
    }
}

fn corrupted(g: &[f64], corrupt: bool) -> Vec<f64> {
    if corrupt {
        g.iter().map(|v| v * 1.01).collect()
    } else {
        g.to_vec()
    }
}

fn check_loss_part(
    case: &LossCase,
    part: Part,
    margin: &AngularMarginConfig,
    lambda: f64,
    corrupt: bool,
) -> Result<Vec<(String, f64)>> {
    let h = DEFAULT_FD_STEP;
    let analytic = eval_part(part, &case.batch, &case.classifier, &case.head, margin, lambda)?;
    let value = |batch: &LabeledBatch, clf: &AngularClassifier, head: &AgeHead| {
        eval_part(part, batch, clf, head, margin, lambda).map_or(f64::NAN, |r| r.value)
    };
    let (rows, dim) = case.batch.features.shape();
    let mut blocks = Vec::new();

    let fd = finite_difference_gradient(
        |x| {
            let mut batch = case.batch.clone();
            batch.features = Matrix::from_raw(rows, dim, x.to_vec());
            value(&batch, &case.classifier, &case.head)
        },
        case.batch.features.data(),
        h,
    )?;
    let a = corrupted(analytic.grad_features.data(), corrupt);
    blocks.push(("features".to_string(), relative_error(&a, &fd, ERROR_FLOOR)));

    if !matches!(part, Part::Age) {
        let w = case.classifier.weights();
        let fd = finite_difference_gradient(
            |x| {
                let clf = AngularClassifier::unconstrained(Matrix::from_raw(w.rows(), w.cols(), x.to_vec()));
                value(&case.batch, &clf, &case.head)
            },
            w.data(),
            h,
        )?;
        let a = corrupted(analytic.grad_weights.data(), corrupt);
        blocks.push(("weights".to_string(), relative_error(&a, &fd, ERROR_FLOOR)));
    }

    if !matches!(part, Part::Identity) {
        let fd = finite_difference_gradient(
            |x| {
                let head = AgeHead { slope: x[0], intercept: x[1] };
                value(&case.batch, &case.classifier, &head)
            },
            &[case.head.slope, case.head.intercept],
            h,
        )?;
        let a = corrupted(&[analytic.grad_age_head.0, analytic.grad_age_head.1], corrupt);
        blocks.push(("age_head".to_string(), relative_error(&a, &fd, ERROR_FLOOR)));
    }
    Ok(blocks)
}

fn set_flat_params(model: &mut Model, x: &[f64]) {
    let mut offset = 0;
    for slice in model.encoder.params.slices_mut() {
        slice.copy_from_slice(&x[offset..offset + slice.len()]);
        offset += slice.len();
    }
    let w = model.classifier.weights_mut().data_mut();
    w.copy_from_slice(&x[offset..offset + w.len()]);
    offset += w.len();
    model.head = AgeHead {
        slope: x[offset],
        intercept: x[offset + 1],
    };
}

fn flat_params(model: &Model) -> Vec<f64> {
    let mut x: Vec<f64> = model.encoder.params.slices().concat();
    x.extend_from_slice(model.classifier.weights().data());
    x.extend([model.head.slope, model.head.intercept]);
    x
}

fn check_end_to_end(objective: &Objective, step: u64, seed: u64, corrupt: bool) -> Result<Vec<(String, f64)>> {
    let mut rng = RandomSource::new(seed);
    let (rows, input_dim, classes) = (8, 6, 3);
    let spec = EncoderSpec {
        layer_widths: vec![input_dim, 7, 4],
        hidden_activations: vec![Activation::Relu],
    };
    let mut model = Model::init(spec, classes, &mut rng)?;
    model.head = AgeHead {
        slope: rng.uniform_in(0.5, 1.5),
        intercept: rng.uniform_in(-0.5, 0.5),
    };
    let inputs = Matrix::new(rows, input_dim, (0..rows * input_dim).map(|_| rng.gaussian()).collect())?;
    let labels: Vec<usize> = (0..rows).map(|i| i % classes).collect();
    let ages: Vec<f64> = (0..rows).map(|_| rng.uniform_in(1.0, 5.0)).collect();

    let (_, grads, _) = model.loss_and_grads(&inputs, &labels, &ages, objective, step)?;
    let x0 = flat_params(&model);
    let fd = finite_difference_gradient(
        |x| {
            let mut m = model.clone();
            set_flat_params(&mut m, x);
            m.loss_and_grads(&inputs, &labels, &ages, objective, step)
                .map_or(f64::NAN, |r| r.0.total)
        },
        &x0,
        DEFAULT_FD_STEP,
    )?;

    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, analytic: &[f64]| {
        let numeric = &fd[offset..offset + analytic.len()];
        offset += analytic.len();
        blocks.push((name, relative_error(&corrupted(analytic, corrupt), numeric, ERROR_FLOOR)));
    };
    for (i, layer) in grads.encoder.layers.iter().enumerate() {
        push(format!("layer{i}.weights"), layer.weights.data());
        push(format!("layer{i}.bias"), &layer.bias);
    }
    push("classifier".to_string(), grads.classifier.data());
    push("age_head".to_string(), &[grads.head.0, grads.head.1]);
    Ok(blocks)
}

/// Runs the whole gradient-check matrix: the identity, age and joint losses
/// over m ∈ {1, 2, 4}, s ∈ {1, 32}, λ ∈ {0, 0.01, 1}, then the end-to-end
/// composition through a two-layer encoder. `corrupt` scales every analytic
/// gradient by 1.01 as a negative control.
pub fn run_grad_check_matrix(seed: u64, corrupt: bool) -> Result<Vec<GradCheckRecord>> {
    let mut records = Vec::new();
    let mut case_seed = seed;
    for m in [1u32, 2, 4] {
        for s in [1.0, 32.0] {
            for lambda in [0.0, 0.01, 1.0] {
                let case = loss_case(case_seed)?;
                case_seed += 1;
                let margin = AngularMarginConfig { m, s, ..Default::default() };
                let mut blocks = Vec::new();
                for (tag, part) in [("id", Part::Identity), ("age", Part::Age), ("joint", Part::Combined)] {
                    for (name, err) in check_loss_part(&case, part, &margin, lambda, corrupt)? {
                        blocks.push((format!("{tag}.{name}"), err));
                    }
                }
                records.push(GradCheckRecord {
                    name: format!("loss m={m} s={s} lambda={lambda}"),
                    blocks,
                });
            }
        }
    }

    let mut encoder_cases = Vec::new();
    for m in [1u32, 4] {
        for (mode, lambda) in [(LossMode::ASoftmax, 0.0), (LossMode::Oe, 0.01), (LossMode::Oe, 1.0)] {
            encoder_cases.push((mode, m, 32.0, lambda, 0.0));
        }
        encoder_cases.push((LossMode::Oe, m, 1.0, 1.0, 5.0));
    }
    encoder_cases.push((LossMode::Softmax, 1, 1.0, 0.0, 0.0));
    for (mode, m, s, lambda, anneal) in encoder_cases {
        let mut objective = Objective::new(mode);
        objective.margin = AngularMarginConfig {
            m,
            s,
            anneal_weight: anneal,
            anneal_decay: 0.9,
        };
        objective.multi_task = MultiTaskConfig { lambda };
        let blocks = check_end_to_end(&objective, 3, case_seed, corrupt)?;
        case_seed += 1;
        records.push(GradCheckRecord {
            name: format!("encoder mode={} m={m} s={s} lambda={lambda} anneal={anneal}", mode.name()),
            blocks,
        });
    }
    Ok(records)
}

pub fn cmd_grad_check(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    cfg.check_keys(&["seed", "corrupt"])?;
    let seed: u64 = cfg.get("seed", 0)?;
    let corrupt = cfg.get_bool("corrupt", false)?;

    let records = run_grad_check_matrix(seed, corrupt)?;
    let mut report = String::from("config\tworst_rel_error\tstatus\n");
    let mut failing = Vec::new();
    for r in &records {
        let status = if r.passed() { "pass" } else { "FAIL" };
        writeln!(report, "{}\t{:.3e}\t{status}", r.name, r.worst()).unwrap();
        if !r.passed() {
            failing.push(r.name.clone());
        }
    }
    write_outputs(&args.out, &[("gradcheck.txt", report.clone())])?;
    print!("{report}");
    if failing.is_empty() {
        println!("all {} configurations within {GRAD_CHECK_TOLERANCE:e}", records.len());
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "{} of {} gradient checks failed: {}",
            failing.len(),
            records.len(),
            failing.join("; ")
        )))
    }
}
