use crate::error::{Error, Result};
use crate::numerics::norm;

/// Guard used when dividing by a feature norm.
pub const DEFAULT_EPS: f64 = 1e-12;

/// A vector split into its Euclidean norm and unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedFeature {
    pub norm: f64,
    pub direction: Vec<f64>,
    /// Set when the source norm was at or below the guard; `direction` is
    /// then not a unit vector.
    pub degenerate: bool,
}

pub fn decompose(x: &[f64], eps: f64) -> Result<DecomposedFeature> {
    if x.is_empty() {
        return Err(Error::Shape("cannot decompose a zero-dimensional vector".into()));
    }
    let n = norm(x);
    let scale = n.max(eps);
    Ok(DecomposedFeature {
        norm: n,
        direction: x.iter().map(|v| v / scale).collect(),
        degenerate: n <= eps,
    })
}

pub fn recompose(d: &DecomposedFeature) -> Vec<f64> {
    d.direction.iter().map(|v| d.norm * v).collect()
}
