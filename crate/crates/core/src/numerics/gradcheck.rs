use crate::error::{Error, Result};
use crate::par;

/// Default central-difference step for `f64` gradient checks.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h`.
///
/// Coordinates are evaluated independently (in parallel when enabled); the
/// result is ordered by coordinate.
pub fn finite_difference_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if !(h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be > 0, got {h}")));
    }
    par::try_map_range(x.len(), |i| {
        let mut probe = x.to_vec();
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite function value at coordinate {i}: f(x+h)={plus}, f(x-h)={minus}"
            )));
        }
        Ok((plus - minus) / (2.0 * h))
    })
}

/// Relative error between two gradient blocks:
/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor)`.
///
/// The floor keeps blocks that are identically zero (e.g. classifier
/// gradients of the age-only loss) from dividing by zero.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error needs equal lengths");
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = super::norm(a);
    let nb = super::norm(b);
    diff / na.max(nb).max(floor)
}
