//! Central finite-difference gradient checking.
//!
//! Backward passes in this crate are hand-derived, so every one of them is
//! validated against the numeric gradient of its forward scalar. The checker
//! perturbs one coordinate at a time with a central stencil.

/// Step used throughout the gradient checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative tolerance for analytic-vs-numeric agreement.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Central finite-difference gradient of `f` at `point`.
///
/// `f` must be a pure scalar function of the full coordinate vector.
pub fn central_difference<F>(mut f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; point.len()];
    let mut work = point.to_vec();
    for i in 0..point.len() {
        let orig = work[i];
        work[i] = orig + step;
        let plus = f(&work);
        work[i] = orig - step;
        let minus = f(&work);
        work[i] = orig;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Largest relative error between an analytic gradient and its numeric
/// counterpart: `|a - n| / max(1, |a|, |n|)` per coordinate.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}
