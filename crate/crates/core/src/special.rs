use crate::error::{Error, Result};

const MAX_HALLEY_ITERATIONS: usize = 50;

/// Principal branch of the Lambert W function on `[0, ∞)`.
///
/// Halley iteration on `w e^w - x` from `ln(1 + x)`; the iterates stay
/// non-negative and the starting point is within a factor of two of the root.
pub fn lambert_w(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "lambert_w is only defined here for x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = x.ln_1p();
    for _ in 0..MAX_HALLEY_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if step.abs() <= 4.0 * f64::EPSILON * next.abs() || f == 0.0 {
            return Ok(next);
        }
        w = next;
    }
    Err(Error::NonConvergence(format!(
        "lambert_w({x}) after {MAX_HALLEY_ITERATIONS} Halley steps"
    )))
}
