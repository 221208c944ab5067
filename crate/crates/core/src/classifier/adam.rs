use super::params::MlpParameters;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: MlpParameters,
    pub second_moment: MlpParameters,
    pub step_count: u64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            first_moment: MlpParameters::zeros(),
            second_moment: MlpParameters::zeros(),
            step_count: 0,
            learning_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.first_moment.is_finite() && self.second_moment.is_finite()
    }
}

/// Applies one Adam update in place.
///
/// A non-finite gradient is rejected before anything is modified.
pub fn adam_step(params: &mut MlpParameters, grad: &MlpParameters, state: &mut AdamState) -> Result<()> {
    if grad.num_values() != params.num_values() {
        return Err(Error::Shape("gradient and parameters differ in size".into()));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let m_correction = 1.0 - ADAM_BETA1.powi(t);
    let v_correction = 1.0 - ADAM_BETA2.powi(t);
    let lr = state.learning_rate;

    let moments = state.first_moment.values_mut().zip(state.second_moment.values_mut());
    for ((theta, &g), (m, v)) in params.values_mut().zip(grad.values()).zip(moments) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / m_correction;
        let v_hat = *v / v_correction;
        *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}
