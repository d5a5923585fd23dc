//! Adam optimizer over the parameter-visitor protocol. Moment buffers are
//! indexed by visit order, which is fixed by module construction.

use crate::nn::params::ParamModule;
use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<ArrayD<f32>>,
    pub v: Vec<ArrayD<f32>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update over every `(param, grad)` the modules expose, then zero
    /// the gradients. Zero learning rate leaves parameters bit-identical.
    pub fn step(&mut self, modules: &mut [&mut dyn ParamModule<f32>]) {
        self.t += 1;
        let b1 = self.config.beta1 as f32;
        let b2 = self.config.beta2 as f32;
        let eps = self.config.eps as f32;
        let bias1 = 1.0 - (self.config.beta1 as f32).powi(self.t as i32);
        let bias2 = 1.0 - (self.config.beta2 as f32).powi(self.t as i32);
        let lr = self.config.lr as f32;
        let mut idx = 0usize;
        for module in modules.iter_mut() {
            module.visit_train(&mut |mut p, mut g| {
                if idx == self.m.len() {
                    self.m.push(ArrayD::zeros(g.raw_dim()));
                    self.v.push(ArrayD::zeros(g.raw_dim()));
                }
                let m = &mut self.m[idx];
                let v = &mut self.v[idx];
                ndarray::Zip::from(&mut p)
                    .and(&mut g)
                    .and(m)
                    .and(v)
                    .for_each(|p, g, m, v| {
                        *m = b1 * *m + (1.0 - b1) * *g;
                        *v = b2 * *v + (1.0 - b2) * *g * *g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                        *g = 0.0;
                    });
                idx += 1;
            });
        }
    }

    pub fn param_tensors(&self) -> usize {
        self.m.len()
    }
}
