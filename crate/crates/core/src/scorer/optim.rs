//! AdamW with decoupled weight decay, and the linear warmup/decay schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-2 }
    }
}

/// First and second moment estimates, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self { first_moment: vec![0.0; len], second_moment: vec![0.0; len], step: 0 }
    }
}

/// One AdamW update in place.
///
/// The decay term `lr * wd * param` is taken from the parameter before the
/// update and never passes through the moment estimates.
pub fn adamw_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
    config: &AdamWConfig,
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.first_moment.len()
        || params.len() != state.second_moment.len()
    {
        return Err(Error::Shape(format!(
            "params {}, grads {}, moments {}/{}",
            params.len(),
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - config.beta1.powi(t);
    let bias2 = 1.0 - config.beta2.powi(t);
    let moments = state.first_moment.iter_mut().zip(state.second_moment.iter_mut());
    for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(moments) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let update = (*m / bias1) / ((*v / bias2).sqrt() + config.epsilon);
        *p = *p - lr * update - lr * config.weight_decay * *p;
    }
    Ok(())
}

/// Number of warmup steps: `⌈fraction · total⌉`.
pub fn warmup_steps(total_steps: u64, warmup_fraction: f64) -> u64 {
    let raw = warmup_fraction * total_steps as f64;
    // 0.1 * 100 is 10.000000000000002 in binary floating point.
    let nearest = raw.round();
    let steps = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) { nearest } else { raw.ceil() };
    (steps as u64).min(total_steps)
}

/// Linear ramp from 0 to `base_lr` over the warmup steps, then linear decay
/// to 0 at `total_steps`.
pub fn schedule_lr(step: u64, total_steps: u64, base_lr: f64, warmup_fraction: f64) -> f64 {
    let total = total_steps.max(1);
    let step = step.min(total);
    let warmup = warmup_steps(total, warmup_fraction);
    if step < warmup {
        base_lr * (step as f64 / warmup as f64)
    } else if warmup == total {
        base_lr
    } else {
        base_lr * ((total - step) as f64 / (total - warmup) as f64)
    }
}
