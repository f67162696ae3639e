use crate::error::{Error, Result};
use crate::nn::ParamVector;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Adam moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }

    /// In-place descent step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64], lr: f64) -> Result<()> {
        if gradient.len() != params.len() || params.len() != self.first_moment.len() {
            return Err(Error::invalid(format!(
                "adam: params {}, gradient {}, state {}",
                params.len(),
                gradient.len(),
                self.first_moment.len()
            )));
        }
        if let Some(i) = gradient.iter().position(|g| g.is_nan()) {
            return Err(Error::Numeric {
                layer: 0,
                context: format!("NaN gradient at coordinate {i}"),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(gradient)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Value-semantics form of [`AdamState::step`].
pub fn adam_step(
    params: &ParamVector,
    state: &AdamState,
    gradient: &[f64],
    lr: f64,
) -> Result<(ParamVector, AdamState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    state.step(params.as_mut_slice(), gradient, lr)?;
    Ok((params, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerShape;

    fn pv(values: Vec<f64>) -> ParamVector {
        let n = values.len();
        // bias-only layout
        ParamVector::from_values(
            vec![LayerShape {
                inputs: 0,
                outputs: n,
            }],
            values,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let p = pv(vec![1.0, -2.0, 3.0]);
        let (q, s) = adam_step(&p, &AdamState::new(3), &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, q);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_lr_updates_moments_only() {
        let p = pv(vec![1.0, -2.0]);
        let (q, s) = adam_step(&p, &AdamState::new(2), &[0.5, -1.0], 0.0).unwrap();
        assert_eq!(p, q);
        assert!((s.first_moment[0] - 0.05).abs() < 1e-15);
        assert!((s.second_moment[1] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn first_step_matches_closed_form() {
        // With fresh moments, m_hat = g and v_hat = g^2, so the step is
        // lr * g / (|g| + eps).
        let g = [0.3, -4.0, 1e-3];
        let lr = 0.01;
        let p = pv(vec![0.0; 3]);
        let (q, _) = adam_step(&p, &AdamState::new(3), &g, lr).unwrap();
        for (qi, gi) in q.as_slice().iter().zip(g) {
            let want = -lr * gi / (gi.abs() + DEFAULT_EPS);
            assert!((qi - want).abs() < 1e-15, "{qi} vs {want}");
        }
    }

    #[test]
    fn nan_gradient_is_an_error() {
        let p = pv(vec![0.0; 2]);
        assert!(adam_step(&p, &AdamState::new(2), &[0.0, f64::NAN], 0.1).is_err());
    }

    #[test]
    fn bit_reproducible() {
        let p = pv(vec![0.1, 0.2, 0.3]);
        let g = [0.7, -0.2, 0.01];
        let a = adam_step(&p, &AdamState::new(3), &g, 0.05).unwrap();
        let b = adam_step(&p, &AdamState::new(3), &g, 0.05).unwrap();
        assert_eq!(a, b);
    }
}
