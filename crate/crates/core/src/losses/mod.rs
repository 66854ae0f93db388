//! Spherical decomposition of embeddings and the losses trained on it.
//!
//! An embedding `x` is split into its norm (the age carrier) and its unit
//! direction (the identity carrier). The identity loss only ever sees the
//! direction, through the angles to unit-norm class weights; the age loss
//! only ever sees the norm, through a linear map onto the age label.

mod age;
mod combined;
mod decompose;
mod identity;
mod margin;
mod softmax;
mod types;

pub use age::age_loss;
pub use combined::combined_loss;
pub use decompose::{decompose, recompose, DecomposedFeature, DEFAULT_EPS};
pub use identity::{identity_loss, predict_angular};
pub use margin::{psi, psi_from_cos, segment_index, COS_CLAMP};
pub use softmax::{predict_linear, softmax_loss};
pub use types::{
    AgeHead, AngularClassifier, AngularMarginConfig, LabeledBatch, LossResult, MultiTaskConfig,
};
