use super::age::age_loss;
use super::identity::identity_loss;
use super::types::{
    AgeHead, AngularClassifier, AngularMarginConfig, LabeledBatch, LossResult, MultiTaskConfig,
};
use crate::error::Result;

/// Joint objective `L_id + λ·L_age`, gradients combined field by field.
pub fn combined_loss(
    batch: &LabeledBatch,
    classifier: &AngularClassifier,
    head: &AgeHead,
    margin: &AngularMarginConfig,
    multi_task: &MultiTaskConfig,
) -> Result<LossResult> {
    multi_task.validate()?;
    let id = identity_loss(batch, classifier, margin)?;
    let age = age_loss(batch, head)?;
    Ok(combine(id, &age, multi_task.lambda))
}

/// `id + λ·age`; the age part has no classifier gradient.
pub(crate) fn combine(id: LossResult, age: &LossResult, lambda: f64) -> LossResult {
    let grad_features = id
        .grad_features
        .add_scaled(&age.grad_features, lambda)
        .expect("constituent losses share the batch shape");
    LossResult {
        value: id.value + lambda * age.value,
        grad_features,
        grad_weights: id.grad_weights,
        grad_age_head: (
            id.grad_age_head.0 + lambda * age.grad_age_head.0,
            id.grad_age_head.1 + lambda * age.grad_age_head.1,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn lambda_zero_is_identity_loss() {
        let batch = LabeledBatch::new(
            Matrix::from_rows(&[[0.4, -1.0], [2.0, 0.5]]).unwrap(),
            vec![1, 0],
            vec![30.0, 60.0],
        )
        .unwrap();
        let clf = AngularClassifier::new(Matrix::from_rows(&[[1.0, 0.2], [-0.3, 1.0]]).unwrap())
            .unwrap();
        let margin = AngularMarginConfig::default();
        let head = AgeHead::default();
        let id = identity_loss(&batch, &clf, &margin).unwrap();
        let both =
            combined_loss(&batch, &clf, &head, &margin, &MultiTaskConfig { lambda: 0.0 }).unwrap();
        assert_eq!(both.value, id.value);
        assert_eq!(both.grad_features, id.grad_features);
        assert_eq!(both.grad_weights, id.grad_weights);
        assert_eq!(both.grad_age_head, (0.0, 0.0));

        let age = age_loss(&batch, &head).unwrap();
        let one =
            combined_loss(&batch, &clf, &head, &margin, &MultiTaskConfig { lambda: 1.0 }).unwrap();
        assert!((one.value - (id.value + age.value)).abs() < 1e-15 * one.value.max(1.0));
    }
}
