use super::types::{AgeHead, LabeledBatch, LossResult};
use crate::error::{Error, Result};
use crate::numerics::{norm, Matrix};

/// Squared-error regression of the age label on the feature norm,
/// `(1/2M)·Σ (f(‖xᵢ‖) − zᵢ)²`.
///
/// The feature gradient is radial: `∂L/∂xᵢ = rᵢ·slope·x̂ᵢ / M`, so the
/// direction of a feature is never moved by this loss.
pub fn age_loss(batch: &LabeledBatch, head: &AgeHead) -> Result<LossResult> {
    let (m_rows, dim) = batch.features.shape();
    if m_rows == 0 {
        return Err(Error::Shape("age loss needs a nonempty batch".into()));
    }
    let inv_m = 1.0 / m_rows as f64;
    let mut value = 0.0;
    let mut d_slope = 0.0;
    let mut d_intercept = 0.0;
    let mut grad_features = Matrix::zeros(m_rows, dim);
    for i in 0..m_rows {
        let x = batch.features.row(i);
        let n = norm(x);
        let residual = head.predict(n) - batch.age_labels[i];
        value += residual * residual;
        d_slope += residual * n;
        d_intercept += residual;
        if n > 0.0 {
            let scale = residual * head.slope * inv_m / n;
            for (g, v) in grad_features.row_mut(i).iter_mut().zip(x) {
                *g = scale * v;
            }
        }
    }
    Ok(LossResult {
        value: 0.5 * inv_m * value,
        grad_features,
        grad_weights: Matrix::zeros(0, dim),
        grad_age_head: (d_slope * inv_m, d_intercept * inv_m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]], ages: &[f64]) -> LabeledBatch {
        LabeledBatch::new(Matrix::from_rows(rows).unwrap(), vec![0; ages.len()], ages.to_vec())
            .unwrap()
    }

    #[test]
    fn examples() {
        let h = AgeHead::default();
        assert_eq!(age_loss(&batch(&[&[3.0, 4.0]], &[5.0]), &h).unwrap().value, 0.0);
        assert_eq!(age_loss(&batch(&[&[3.0, 0.0]], &[5.0]), &h).unwrap().value, 2.0);
        assert_eq!(
            age_loss(&batch(&[&[1.0, 0.0], &[0.0, 2.0]], &[1.0, 1.0]), &h).unwrap().value,
            0.25
        );
    }

    #[test]
    fn gradient_is_radial() {
        let r = age_loss(&batch(&[&[1.0, 2.0]], &[7.0]), &AgeHead { slope: 1.5, intercept: 0.3 })
            .unwrap();
        let g = r.grad_features.row(0);
        // parallel to (1, 2)
        assert!((g[0] * 2.0 - g[1]).abs() < 1e-15);
        assert_eq!(r.grad_weights.shape(), (0, 2));
    }
}
