//! Adam with global-norm clipping and cosine annealing with warm restarts.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    /// Length of the first period, in epochs.
    pub t0: f64,
    pub t_mult: u32,
    pub lr_min: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            t0: 10.0,
            t_mult: 2,
            lr_min: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_max_norm: f64,
    pub schedule: Schedule,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_max_norm: 1.0,
            schedule: Schedule::default(),
        }
    }
}

/// Learning rate at a (fractional) epoch.
pub fn lr_at(epoch: f64, lr_base: f64, s: &Schedule) -> f64 {
    let mut t_cur = epoch.max(0.0);
    let mut period = s.t0;
    if s.t_mult <= 1 {
        t_cur %= period;
    } else {
        while t_cur >= period {
            t_cur -= period;
            period *= f64::from(s.t_mult);
        }
    }
    s.lr_min + 0.5 * (lr_base - s.lr_min) * (1.0 + (std::f64::consts::PI * t_cur / period).cos())
}

/// Global L2 norm over all gradient tensors.
pub fn global_norm<'a>(grads: impl IntoIterator<Item = &'a Array2<f64>>) -> f64 {
    grads
        .into_iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [&mut Array2<f64>], max_norm: f64) -> Result<f64> {
    if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("clip_gradients"));
    }
    let norm = global_norm(grads.iter().map(|g| &**g));
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|x| x * k);
        }
    }
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl OptimState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<_> = params.iter().map(|(_, p)| Array2::zeros(p.value.dim())).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Clips the stored gradients, then applies one bias-corrected Adam
    /// update at learning rate `lr`. Returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64) -> Result<f64> {
        if self.m.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                got: self.m.len(),
            });
        }
        let mut grads: Vec<&mut Array2<f64>> = params.iter_mut().map(|p| &mut p.grad).collect();
        let norm = clip_gradients(&mut grads, self.config.clip_max_norm)?;
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.grad.dim() != m.dim() {
                return Err(Error::Shape {
                    op: "adam",
                    lhs: p.grad.dim(),
                    rhs: m.dim(),
                });
            }
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|x, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mh = *m / bc1;
                    let vh = *v / bc2;
                    *x -= lr * mh / (vh.sqrt() + eps);
                });
        }
        Ok(norm)
    }
}
