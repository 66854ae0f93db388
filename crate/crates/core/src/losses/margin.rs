use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Cosines are clamped to `[−1 + COS_CLAMP, 1 − COS_CLAMP]` before any arccos.
pub const COS_CLAMP: f64 = 1e-9;

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {theta} outside [0, π]")))
    }
}

/// Index `k` of the segment `[kπ/m, (k+1)π/m]` containing `theta`, with
/// `theta = π` assigned to the last segment.
pub fn segment_index(theta: f64, m: u32) -> Result<u32> {
    check_angle(theta)?;
    if m == 0 {
        return Err(Error::Domain("margin multiplier m must be >= 1".into()));
    }
    let k = (m as f64 * theta / PI).floor() as u32;
    Ok(k.min(m - 1))
}

/// The monotone margin surrogate `(−1)^k cos(mθ) − 2k`.
pub fn psi(theta: f64, m: u32) -> Result<f64> {
    let k = segment_index(theta, m)?;
    Ok(sign(k) * (m as f64 * theta).cos() - 2.0 * k as f64)
}

/// ψ and dψ/d(cos θ) evaluated from `c = cos θ`.
///
/// Uses `cos(mθ) = T_m(c)` and `T_m'(c) = m·U_{m−1}(c)`, which avoids the
/// `1/sin θ` factor of differentiating through arccos. The segment index
/// still comes from the arccos form so the two agree on every segment.
pub fn psi_from_cos(c: f64, m: u32) -> (f64, f64) {
    debug_assert!(m >= 1);
    let theta = c.clamp(-1.0, 1.0).acos();
    let k = ((m as f64 * theta / PI).floor() as u32).min(m - 1);
    let (t, u_prev) = chebyshev(c, m);
    let sgn = sign(k);
    (sgn * t - 2.0 * k as f64, sgn * m as f64 * u_prev)
}

fn sign(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Returns `(T_m(c), U_{m−1}(c))`.
fn chebyshev(c: f64, m: u32) -> (f64, f64) {
    let (mut t0, mut t1) = (1.0, c);
    let (mut u0, mut u1) = (0.0, 1.0); // U_{-1}, U_0
    for _ in 1..m {
        let t2 = 2.0 * c * t1 - t0;
        let u2 = 2.0 * c * u1 - u0;
        t0 = t1;
        t1 = t2;
        u0 = u1;
        u1 = u2;
    }
    (t1, u1)
}
