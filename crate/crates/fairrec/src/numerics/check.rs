/// Central finite-difference gradient check.
///
/// Returns the maximum per-coordinate relative error between `analytic` and
/// the numeric gradient of `loss` at `params`. `loss` must be pure and
/// deterministic (freeze any noise before calling).
pub fn finite_diff_check<F>(loss: F, params: &[f64], epsilon: f64, analytic: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..work.len() {
        let orig = work[i];
        work[i] = orig + epsilon;
        let up = loss(&work);
        work[i] = orig - epsilon;
        let down = loss(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let denom = numeric.abs().max(1e-4);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    max_rel
}
