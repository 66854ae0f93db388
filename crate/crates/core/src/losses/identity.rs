use super::margin::{psi_from_cos, COS_CLAMP};
use super::types::{AngularClassifier, AngularMarginConfig, LabeledBatch, LossResult};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Matrix};
use crate::par;

/// Per-sample intermediate terms of the identity loss.
struct SampleTerms {
    loss: f64,
    /// ∂loss/∂cos θⱼ for every class, clamp mask and logit scale included.
    dcos: Vec<f64>,
    /// Raw (unclamped) cosines.
    cos: Vec<f64>,
    direction: Vec<f64>,
    norm: f64,
}

/// Angular-margin softmax loss on feature directions.
///
/// Logits are `s·cos θⱼ` for competing classes and `s·ψ(θ_y)` for the
/// labelled class, where θ is measured between the normalized feature and
/// the normalized class weight. With `anneal_weight = a > 0` the target
/// logit becomes `s·(a·cos θ_y + ψ(θ_y))/(1 + a)`.
pub fn identity_loss(
    batch: &LabeledBatch,
    classifier: &AngularClassifier,
    cfg: &AngularMarginConfig,
) -> Result<LossResult> {
    cfg.validate()?;
    let (m_rows, dim) = batch.features.shape();
    let classes = classifier.num_classes();
    if classifier.dim() != dim {
        return Err(Error::Shape(format!(
            "features have {dim} columns but classifier weights have {}",
            classifier.dim()
        )));
    }
    if m_rows == 0 {
        return Err(Error::Shape("identity loss needs a nonempty batch".into()));
    }
    for (index, &label) in batch.identity_labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Label { index, label, classes });
        }
    }

    let weights = classifier.weights();
    let weight_norms: Vec<f64> = weights.iter_rows().map(norm).collect();
    if let Some(j) = weight_norms.iter().position(|n| !(*n > 0.0)) {
        return Err(Error::Numerical(format!("classifier row {j} has zero norm")));
    }
    let unit_weights: Vec<Vec<f64>> = weights
        .iter_rows()
        .zip(&weight_norms)
        .map(|(r, n)| r.iter().map(|v| v / n).collect())
        .collect();

    let terms = par::try_map_range(m_rows, |i| {
        sample_terms(
            batch.features.row(i),
            batch.identity_labels[i],
            &unit_weights,
            cfg,
        )
        .map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("sample {i}: {msg}")),
            other => other,
        })
    })?;

    let inv_m = 1.0 / m_rows as f64;
    let value = terms.iter().map(|t| t.loss).sum::<f64>() * inv_m;

    let mut grad_features = Matrix::zeros(m_rows, dim);
    par::for_each_row_mut(grad_features.data_mut(), dim, |i, out| {
        let t = &terms[i];
        for (j, w) in unit_weights.iter().enumerate() {
            let g = t.dcos[j];
            if g == 0.0 {
                continue;
            }
            let c = t.cos[j];
            for ((o, wv), xv) in out.iter_mut().zip(w).zip(&t.direction) {
                *o += g * (wv - c * xv) / t.norm;
            }
        }
        out.iter_mut().for_each(|v| *v *= inv_m);
    });

    let mut grad_weights = Matrix::zeros(classes, dim);
    par::for_each_row_mut(grad_weights.data_mut(), dim, |j, out| {
        let w = &unit_weights[j];
        for t in &terms {
            let g = t.dcos[j];
            if g == 0.0 {
                continue;
            }
            let c = t.cos[j];
            for ((o, wv), xv) in out.iter_mut().zip(w).zip(&t.direction) {
                *o += g * (xv - c * wv);
            }
        }
        let scale = inv_m / weight_norms[j];
        out.iter_mut().for_each(|v| *v *= scale);
    });

    Ok(LossResult {
        value,
        grad_features,
        grad_weights,
        grad_age_head: (0.0, 0.0),
    })
}

fn sample_terms(
    x: &[f64],
    label: usize,
    unit_weights: &[Vec<f64>],
    cfg: &AngularMarginConfig,
) -> Result<SampleTerms> {
    let n = norm(x);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Numerical(format!("feature norm is {n}")));
    }
    let direction: Vec<f64> = x.iter().map(|v| v / n).collect();
    let cos: Vec<f64> = unit_weights.iter().map(|w| dot(w, &direction)).collect();

    let s = cfg.s;
    let a = cfg.anneal_weight;
    let lo = -1.0 + COS_CLAMP;
    let hi = 1.0 - COS_CLAMP;

    // dz/dcos per class; zero where the cosine was clamped
    let mut logits = Vec::with_capacity(cos.len());
    let mut dlogit = Vec::with_capacity(cos.len());
    for (j, &c) in cos.iter().enumerate() {
        if j == label {
            let cc = c.clamp(lo, hi);
            let (psi, dpsi) = psi_from_cos(cc, cfg.m);
            let clamped = cc != c;
            logits.push(s * (a * cc + psi) / (1.0 + a));
            dlogit.push(if clamped { 0.0 } else { s * (a + dpsi) / (1.0 + a) });
        } else {
            logits.push(s * c);
            dlogit.push(s);
        }
    }

    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let lse = max + sum_exp.ln();
    let loss = lse - logits[label];
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("loss term is {loss}")));
    }

    let dcos = logits
        .iter()
        .zip(&dlogit)
        .enumerate()
        .map(|(j, (z, dz))| {
            let p = (z - lse).exp();
            let target = if j == label { 1.0 } else { 0.0 };
            (p - target) * dz
        })
        .collect();

    Ok(SampleTerms {
        loss,
        dcos,
        cos,
        direction,
        norm: n,
    })
}

/// Predicted class of every row: the class weight with the largest cosine
/// (ties resolve to the lowest class index).
pub fn predict_angular(features: &Matrix, classifier: &AngularClassifier) -> Vec<usize> {
    let weights = classifier.weights();
    let norms: Vec<f64> = weights.iter_rows().map(norm).collect();
    par::map_range(features.rows(), |i| {
        let x = features.row(i);
        let mut best = 0;
        let mut best_cos = f64::NEG_INFINITY;
        for (j, w) in weights.iter_rows().enumerate() {
            let c = dot(w, x) / norms[j];
            if c > best_cos {
                best_cos = c;
                best = j;
            }
        }
        best
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]], labels: &[usize]) -> LabeledBatch {
        LabeledBatch::new(
            Matrix::from_rows(rows).unwrap(),
            labels.to_vec(),
            vec![0.0; labels.len()],
        )
        .unwrap()
    }

    fn cfg(m: u32, s: f64) -> AngularMarginConfig {
        AngularMarginConfig { m, s, anneal_weight: 0.0, anneal_decay: 1.0 }
    }

    #[test]
    fn aligned_feature_with_orthogonal_competitor() {
        // ψ(0) = 1 and cos(π/2) = 0, so the loss is log(1 + e^{-1})
        let clf = AngularClassifier::new(Matrix::identity(2)).unwrap();
        let r = identity_loss(&batch(&[&[2.0, 0.0]], &[0]), &clf, &cfg(4, 1.0)).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((expected - 0.313_261_7).abs() < 1e-7);
        // the clamp moves the aligned cosine by 1e-9, shifting ψ by ~1.6e-8
        assert!((r.value - expected).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn uniform_cosines_give_log_c() {
        // feature along (1,1,1)/√3 with the three axis weights: all cosines equal
        let clf = AngularClassifier::new(Matrix::identity(3)).unwrap();
        for s in [1.0, 7.5, 32.0] {
            let r = identity_loss(&batch(&[&[1.0, 1.0, 1.0]], &[1]), &clf, &cfg(1, s)).unwrap();
            assert!((r.value - 3f64.ln()).abs() < 1e-12, "s={s}: {}", r.value);
        }
    }

    #[test]
    fn positive_rescaling_leaves_value_unchanged() {
        let clf = AngularClassifier::new(
            Matrix::from_rows(&[[0.3, -1.0, 0.2], [1.0, 0.5, 0.0], [-0.4, 0.1, 0.9]]).unwrap(),
        )
        .unwrap();
        let b = batch(&[&[0.5, -0.2, 1.0], &[-1.0, 0.3, 0.4]], &[2, 0]);
        let scaled = LabeledBatch { features: b.features.scale(3.0), ..b.clone() };
        let c = cfg(4, 32.0);
        let v1 = identity_loss(&b, &clf, &c).unwrap().value;
        let v2 = identity_loss(&scaled, &clf, &c).unwrap().value;
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        let clf = AngularClassifier::new(Matrix::identity(2)).unwrap();
        let err = identity_loss(&batch(&[&[1.0, 0.0]], &[2]), &clf, &cfg(4, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Label { index: 0, label: 2, classes: 2 }));
    }

    #[test]
    fn zero_feature_names_sample() {
        let clf = AngularClassifier::new(Matrix::identity(2)).unwrap();
        let err = identity_loss(&batch(&[&[1.0, 0.0], &[0.0, 0.0]], &[0, 1]), &clf, &cfg(4, 1.0))
            .unwrap_err();
        assert!(err.to_string().contains("sample 1"), "{err}");
    }

    #[test]
    fn anneal_zero_matches_plain() {
        let clf = AngularClassifier::new(Matrix::identity(2)).unwrap();
        let b = batch(&[&[0.8, 0.3]], &[1]);
        let plain = identity_loss(&b, &clf, &cfg(4, 2.0)).unwrap();
        let annealed = identity_loss(
            &b,
            &clf,
            &AngularMarginConfig { anneal_weight: 0.0, anneal_decay: 0.5, ..cfg(4, 2.0) },
        )
        .unwrap();
        assert_eq!(plain, annealed);
    }

    #[test]
    fn prediction_ties_pick_lowest_class() {
        let clf = AngularClassifier::new(Matrix::identity(2)).unwrap();
        let f = Matrix::from_rows(&[[1.0, 1.0], [0.1, 2.0]]).unwrap();
        assert_eq!(predict_angular(&f, &clf), vec![0, 1]);
    }
}
