use super::Param;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Adam hyper-parameters with a step-decay learning rate:
/// `lr(step) = lr0 * decay_factor ^ floor(step / decay_every)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay_every: 5000,
            decay_factor: 0.96,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Argument(format!(
                "decay_factor must be in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::Argument("decay_every must be positive".into()));
        }
        if self.lr0.is_nan() || self.lr0 <= 0.0 || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Argument("invalid Adam rates".into()));
        }
        Ok(())
    }

    /// Learning rate in effect at 0-based `step`.
    pub fn learning_rate(&self, step: usize) -> f64 {
        let decays = (step / self.decay_every) as i32;
        self.lr0 * self.decay_factor.powi(decays)
    }
}

/// One Adam update at 0-based `step` using `param.grad`, which is zeroed
/// afterwards. A block whose gradient is entirely zero is left untouched,
/// moments included.
pub fn adam_step(param: &mut Param, config: &AdamConfig, step: usize) -> Result<()> {
    if let Some(i) = param.grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {}[{i}]", param.name)));
    }
    if param.grad.iter().all(|&g| g == 0.0) {
        return Ok(());
    }
    let lr = config.learning_rate(step);
    let t = (step + 1) as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for i in 0..param.values.len() {
        let g = param.grad[i];
        let m = config.beta1 * param.adam_m[i] + (1.0 - config.beta1) * g;
        let v = config.beta2 * param.adam_v[i] + (1.0 - config.beta2) * g * g;
        param.adam_m[i] = m;
        param.adam_v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        param.values[i] -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
        param.grad[i] = 0.0;
    }
    param.check_finite()
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(params: &mut [&mut Param], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
