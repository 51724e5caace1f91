//! Central finite differences for validating hand-written backward passes.

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_differences(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest elementwise discrepancy, relative to the larger infinity norm of
/// the two gradients. Returns 0 when both are identically zero.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Compares `analytic` against central differences of `f` at `x`.
pub fn gradient_check(f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    let numeric = central_differences(f, x, FD_STEP);
    max_relative_error(analytic, &numeric)
}
