use super::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Adam moment accumulators shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(model: &Mlp) -> Self {
        Self::with_betas(model, 0.9, 0.999)
    }

    pub fn with_betas(model: &Mlp, beta1: f64, beta2: f64) -> Self {
        Self {
            first_moment: model.zero_gradients(),
            second_moment: model.zero_gradients(),
            step: 0,
            beta1,
            beta2,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient leaves model and state untouched.
pub fn adam_step(model: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let shapes_match = grads.len() == model.layers.len()
        && model.layers.iter().zip(grads).all(|(l, g)| l.same_shape(g))
        && state.first_moment.len() == model.layers.len()
        && model
            .layers
            .iter()
            .zip(&state.first_moment)
            .all(|(l, m)| l.same_shape(m));
    if !shapes_match {
        return Err(Error::shape(
            "adam_step",
            "gradients shaped like the model",
            "mismatched shapes",
        ));
    }
    if let Some(layer) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of layer {layer}")));
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for (((layer, g), m), v) in model
        .layers
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for (((p, &g), m), v) in layer
            .values_mut()
            .zip(g.values())
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
