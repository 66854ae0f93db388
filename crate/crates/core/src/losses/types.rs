use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm, Matrix, RandomSource};

/// Hyper-parameters of the angular-margin identity loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularMarginConfig {
    /// Integer margin multiplier, `m ≥ 1`.
    pub m: u32,
    /// Logit scale replacing the feature norm, `s > 0`.
    pub s: f64,
    /// Weight `a` blending the plain cosine into the target logit as
    /// `(a·cos θ + ψ(θ)) / (1 + a)`; zero disables the blend.
    pub anneal_weight: f64,
    /// Per-step multiplicative decay of `anneal_weight`, in `(0, 1]`.
    pub anneal_decay: f64,
}

impl Default for AngularMarginConfig {
    fn default() -> Self {
        Self {
            m: 4,
            s: 32.0,
            anneal_weight: 0.0,
            anneal_decay: 1.0,
        }
    }
}

impl AngularMarginConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::config("m", "margin multiplier must be >= 1"));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::config("s", "scale must be positive and finite"));
        }
        if !(self.anneal_weight >= 0.0 && self.anneal_weight.is_finite()) {
            return Err(Error::config("anneal_weight", "must be >= 0"));
        }
        if !(self.anneal_decay > 0.0 && self.anneal_decay <= 1.0) {
            return Err(Error::config("anneal_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// The blend weight in effect after `step` optimizer steps.
    pub fn anneal_at(&self, step: u64) -> f64 {
        if self.anneal_weight == 0.0 {
            return 0.0;
        }
        self.anneal_weight * self.anneal_decay.powf(step as f64)
    }

    /// Copy of this config with the blend weight of step `step` baked in.
    pub fn at_step(&self, step: u64) -> Self {
        Self {
            anneal_weight: self.anneal_at(step),
            ..*self
        }
    }
}

/// Weight `λ` of the age loss in the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskConfig {
    pub lambda: f64,
}

impl Default for MultiTaskConfig {
    fn default() -> Self {
        Self { lambda: 0.01 }
    }
}

impl MultiTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be >= 0"));
        }
        Ok(())
    }
}

/// One unit-norm weight vector per identity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularClassifier {
    weights: Matrix,
}

impl AngularClassifier {
    /// Normalizes every row of `weights`; zero rows are rejected.
    pub fn new(weights: Matrix) -> Result<Self> {
        let mut c = Self { weights };
        c.renormalize()?;
        Ok(c)
    }

    /// Class directions drawn uniformly from the unit sphere.
    pub fn random(classes: usize, dim: usize, rng: &mut RandomSource) -> Self {
        let mut data = Vec::with_capacity(classes * dim);
        for _ in 0..classes {
            data.extend(rng.unit_vector(dim));
        }
        Self {
            weights: Matrix::from_raw(classes, dim, data),
        }
    }

    /// Wraps weights without touching them; used for the plain softmax
    /// baseline, whose rows are unconstrained.
    pub fn unconstrained(weights: Matrix) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn renormalize(&mut self) -> Result<()> {
        for j in 0..self.weights.rows() {
            let row = self.weights.row_mut(j);
            let n = norm(row);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Numerical(format!(
                    "classifier row {j} has norm {n} and cannot be normalized"
                )));
            }
            row.iter_mut().for_each(|v| *v /= n);
        }
        Ok(())
    }
}

/// The linear age map `f(r) = slope·r + intercept` applied to feature norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeHead {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for AgeHead {
    fn default() -> Self {
        Self {
            slope: 1.0,
            intercept: 0.0,
        }
    }
}

impl AgeHead {
    pub fn predict(&self, norm: f64) -> f64 {
        self.slope * norm + self.intercept
    }
}

/// Features with their identity and age labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Matrix,
    pub identity_labels: Vec<usize>,
    pub age_labels: Vec<f64>,
}

impl LabeledBatch {
    pub fn new(features: Matrix, identity_labels: Vec<usize>, age_labels: Vec<f64>) -> Result<Self> {
        let m = features.rows();
        if identity_labels.len() != m || age_labels.len() != m {
            return Err(Error::Shape(format!(
                "batch has {m} feature rows, {} identity labels and {} age labels",
                identity_labels.len(),
                age_labels.len()
            )));
        }
        Ok(Self {
            features,
            identity_labels,
            age_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss value with analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad_features: Matrix,
    /// `C×n`; empty (`0×n`) for the age-only loss, which has no classifier.
    pub grad_weights: Matrix,
    /// `(∂/∂slope, ∂/∂intercept)`; zero for the identity-only loss.
    pub grad_age_head: (f64, f64),
}

impl LossResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_features.is_finite()
            && self.grad_weights.is_finite()
            && self.grad_age_head.0.is_finite()
            && self.grad_age_head.1.is_finite()
    }
}
