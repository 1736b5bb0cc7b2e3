//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::EncoderParameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: EncoderParameters,
    pub v: EncoderParameters,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &EncoderParameters) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One update. Non-finite gradients abort the step and leave both the
/// parameters and the state untouched.
pub fn adam_step(
    params: &mut EncoderParameters,
    grads: &EncoderParameters,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let (b1, b2) = (config.beta1, config.beta2);
    state.m.zip_mut(grads, |m, g| {
        m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
    });
    state.v.zip_mut(grads, |v, g| {
        v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
    });
    let m: Vec<_> = state.m.tensors().into_iter().map(|(_, t)| t).collect();
    let v: Vec<_> = state.v.tensors().into_iter().map(|(_, t)| t).collect();
    let mut i = 0;
    params.for_each_mut(|_, p| {
        ndarray::Zip::from(p).and(m[i]).and(v[i]).for_each(|p, &m, &v| {
            *p -= config.lr * (m / c1) / ((v / c2).sqrt() + config.eps);
        });
        i += 1;
    });
    Ok(())
}
