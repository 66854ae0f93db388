use super::types::{AngularClassifier, LabeledBatch, LossResult};
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};
use crate::par;

/// Plain softmax cross-entropy on unnormalized logits `wⱼ·x`.
///
/// The baseline the angular losses are compared against; the classifier
/// rows are treated as free parameters.
pub fn softmax_loss(batch: &LabeledBatch, classifier: &AngularClassifier) -> Result<LossResult> {
    let (m_rows, dim) = batch.features.shape();
    let weights = classifier.weights();
    let classes = weights.rows();
    if weights.cols() != dim {
        return Err(Error::Shape(format!(
            "features have {dim} columns but classifier weights have {}",
            weights.cols()
        )));
    }
    if m_rows == 0 {
        return Err(Error::Shape("softmax loss needs a nonempty batch".into()));
    }
    for (index, &label) in batch.identity_labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Label { index, label, classes });
        }
    }

    // (loss, dlogits) per sample
    let terms = par::try_map_range(m_rows, |i| {
        let x = batch.features.row(i);
        let y = batch.identity_labels[i];
        let logits: Vec<f64> = weights.iter_rows().map(|w| dot(w, x)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let loss = lse - logits[y];
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("sample {i}: loss term is {loss}")));
        }
        let d: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(j, z)| (z - lse).exp() - if j == y { 1.0 } else { 0.0 })
            .collect();
        Ok((loss, d))
    })?;

    let inv_m = 1.0 / m_rows as f64;
    let value = terms.iter().map(|t| t.0).sum::<f64>() * inv_m;
    let dlogits = Matrix::from_raw(
        m_rows,
        classes,
        terms.into_iter().flat_map(|t| t.1).collect(),
    );
    let grad_features = dlogits.matmul(weights)?.scale(inv_m);
    let grad_weights = dlogits.t_matmul(&batch.features)?.scale(inv_m);
    Ok(LossResult {
        value,
        grad_features,
        grad_weights,
        grad_age_head: (0.0, 0.0),
    })
}

/// Argmax of the unnormalized logits (ties to the lowest class index).
pub fn predict_linear(features: &Matrix, classifier: &AngularClassifier) -> Vec<usize> {
    let weights = classifier.weights();
    par::map_range(features.rows(), |i| {
        let x = features.row(i);
        let mut best = 0;
        let mut best_z = f64::NEG_INFINITY;
        for (j, w) in weights.iter_rows().enumerate() {
            let z = dot(w, x);
            if z > best_z {
                best_z = z;
                best = j;
            }
        }
        best
    })
}
