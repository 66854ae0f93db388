//! Identity-only similarity and the identification / verification
//! protocols: gallery-probe rank-1, rank-1 under distractors, ROC/AUC over
//! scored pairs, and k-fold threshold transfer.

mod io;
mod kfold;
mod rank;
mod roc;

pub use io::{parse_embeddings, read_embeddings, write_embeddings, EmbeddingTable, EMBEDDINGS_HEADER};
pub use kfold::{kfold_accuracy, thresholded_accuracy};
pub use rank::{distractor_rank1, rank1_identification};
pub use roc::{roc_auc, RocCurve};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Matrix};

/// Labelled embeddings, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub embeddings: Matrix,
    pub identities: Vec<usize>,
    pub ages: Option<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(embeddings: Matrix, identities: Vec<usize>) -> Result<Self> {
        if identities.len() != embeddings.rows() {
            return Err(Error::Shape(format!(
                "{} embeddings but {} identities",
                embeddings.rows(),
                identities.len()
            )));
        }
        Ok(Self {
            embeddings,
            identities,
            ages: None,
        })
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }
}

/// Cosine of the angle between `a` and `b`: the dot product of their unit
/// directions, blind to either norm.
pub fn identity_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("similarity of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Protocol outcome, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub protocol: String,
    pub metrics: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    pub config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldResult {
    pub threshold: f64,
    pub accuracy: f64,
    pub size: usize,
}

impl EvalReport {
    pub fn new(protocol: &str) -> Self {
        Self {
            protocol: protocol.to_string(),
            metrics: BTreeMap::new(),
            counts: BTreeMap::new(),
            config: BTreeMap::new(),
            roc: None,
            folds: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
