/// Magnitude below which gradients are compared absolutely rather than
/// relatively.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Compares `analytic` against central differences of `f` around `theta`,
/// one coordinate at a time, and returns the worst relative error. `theta` is
/// restored before returning.
pub fn grad_check<F>(mut f: F, theta: &mut [f64], analytic: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len());
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let up = f(theta);
        theta[i] = orig - eps;
        let down = f(theta);
        theta[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
