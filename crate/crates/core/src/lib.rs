//! Orthogonal embedding decomposition toolkit.
//!
//! Embeddings are split into a norm, trained to carry age through a linear
//! regression head, and a unit direction, trained with an angular-margin
//! softmax to carry identity. Only the direction is used for matching.
//!
//! Modules, bottom up:
//! - [`numerics`]: matrices, seeded randomness, finite-difference oracle
//! - [`losses`]: decomposition, margin function, identity / age / joint losses
//! - [`model`]: feed-forward encoder, SGD, training loop, checkpoints
//! - [`datagen`]: synthetic cross-age data, splits and verification pairs
//! - [`eval`]: rank-1 identification, distractors, ROC/AUC, k-fold accuracy
//! - [`cli`]: the `oefd` command-line front end

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod par;
mod textio;

pub use error::{Error, Result};
