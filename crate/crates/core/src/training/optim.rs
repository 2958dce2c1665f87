use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};
use crate::layers::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.99, eps: 1e-8 }
    }
}

/// Adam with bias correction, applied to the real and imaginary planes
/// independently.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    /// First and second moments per trainable parameter.
    pub moments: BTreeMap<ParamId, (ComplexTensor, ComplexTensor)>,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let moments = store
            .trainable()
            .map(|id| {
                let shape = store.get(id).shape();
                (id, (ComplexTensor::zeros(shape), ComplexTensor::zeros(shape)))
            })
            .collect();
        Self { config, step: 0, moments }
    }

    /// One update; every trainable parameter needs a gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &BTreeMap<ParamId, ComplexTensor>, lr: f64) -> Result<()> {
        for &id in self.moments.keys() {
            let g = grads
                .get(&id)
                .ok_or_else(|| Error::Contract(format!("no gradient for parameter {}", store.name(id))))?;
            if g.shape() != store.get(id).shape() {
                return Err(Error::Contract(format!("gradient shape mismatch for {}", store.name(id))));
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (&id, (m, v)) in &mut self.moments {
            let g = &grads[&id];
            let p = store.get_mut(id);
            let (pr, pi) = p.planes_mut();
            let (mr, mi) = m.planes_mut();
            let (vr, vi) = v.planes_mut();
            for (param, mom, var, grad) in [(pr, mr, vr, g.re()), (pi, mi, vi, g.im())] {
                for j in 0..param.len() {
                    mom[j] = beta1 * mom[j] + (1.0 - beta1) * grad[j];
                    var[j] = beta2 * var[j] + (1.0 - beta2) * grad[j] * grad[j];
                    param[j] -= lr * (mom[j] / c1) / ((var[j] / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Step decay: `initial · factor^⌊epoch / period⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub factor: f64,
    pub period: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 1e-3, factor: 0.5, period: 50 }
    }
}

impl LrSchedule {
    pub fn lr(&self, epoch: usize) -> f64 {
        self.initial * self.factor.powi((epoch / self.period.max(1)) as i32)
    }
}

/// Scale all gradients so their joint norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut BTreeMap<ParamId, ComplexTensor>, max_norm: f64) -> f64 {
    let norm = grads.values().map(ComplexTensor::energy).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            *g = g.scale(s);
        }
    }
    norm
}
