//! Dense row-major matrices, seeded randomness and the finite-difference
//! gradient oracle.

mod gradcheck;
mod matrix;
mod random;

pub use gradcheck::{finite_difference_gradient, relative_error, DEFAULT_FD_STEP};
pub use matrix::{normalize_rows, row_norms, Matrix};
pub use random::{RandomSource, RandomState};

/// Euclidean norm of a slice.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Dot product, summed in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
