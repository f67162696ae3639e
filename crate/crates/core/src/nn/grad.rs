use crate::error::Result;

/// A scalar loss over a flat parameter vector with an analytic gradient.
///
/// Implementations compose the network's reverse pass ([`super::backward`])
/// with hand-derived gradients of their loss heads.
pub trait Objective {
    fn value(&self, params: &[f64]) -> Result<f64>;

    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

pub fn grad<O: Objective + ?Sized>(loss: &O, params: &[f64]) -> Result<Vec<f64>> {
    Ok(loss.value_and_grad(params)?.1)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

pub fn central_difference<O: Objective + ?Sized>(
    loss: &O,
    params: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + step;
        let up = loss.value(&work)?;
        work[i] = orig - step;
        let down = loss.value(&work)?;
        work[i] = orig;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Largest coordinate-wise `|a - b| / max(|a|, |b|, floor)`.
///
/// The floor keeps coordinates whose true derivative is zero from dividing
/// round-off by round-off.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
