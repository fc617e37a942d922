use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay: each step also subtracts `lr * weight_decay * p`.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, params: &[Tensor<T>]) -> Self {
        let zeros = |p: &Tensor<T>| Tensor::zeros(p.shape());
        Adam {
            config,
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Non-finite gradients abort with [`Error::Divergence`]
    /// before any parameter is touched.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} params, {} grads, {} slots", params.len(), grads.len(), self.m.len()),
            ));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam_step", format!("{:?} vs {:?}", p.shape(), g.shape())));
            }
            if !g.is_finite() {
                return Err(Error::Divergence("non-finite gradient".into()));
            }
        }
        self.step += 1;
        let c = self.config;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let lr = T::from_f64(c.lr);
        let eps = T::from_f64(c.eps);
        let inv_bc1 = T::from_f64(1.0 / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let decay = T::from_f64(1.0 - c.lr * c.weight_decay);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (pd, gd) = (p.data_mut(), g.data());
            let (md, vd) = (m.data_mut(), v.data_mut());
            for j in 0..pd.len() {
                let gj = gd[j];
                md[j] = b1 * md[j] + (T::one() - b1) * gj;
                vd[j] = b2 * vd[j] + (T::one() - b2) * gj * gj;
                let mhat = md[j] * inv_bc1;
                let vhat = vd[j] * inv_bc2;
                pd[j] = decay * pd[j] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = T::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}
