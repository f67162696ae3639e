//! Small dense networks with reverse-mode gradients and Adam.

mod adam;
mod dist;
mod grad;
mod mlp;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use dist::{argmax, categorical_sample, entropy, log_softmax, softmax};
pub use grad::{central_difference, grad, max_relative_error, Objective, FD_REL_TOL, FD_STEP};
pub use mlp::{
    backward, forward_batch, mlp_forward, Activation, Activations, LayerParams, LayerShape, Mlp,
    MlpSpec, ParamVector, ACTOR_FINAL_GAIN, CRITIC_FINAL_GAIN, DEFAULT_HIDDEN,
};

/// Scales `grad` in place so its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-12);
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}
