use serde::{Deserialize, Serialize};

use super::params::{flatten, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale gradients whose global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: None,
        }
    }
}

/// Bias-corrected Adam with one moment pair per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Parameters>(config: AdamConfig, params: &P) -> Self {
        let blocks = flatten(params);
        Self {
            config,
            step: 0,
            m: blocks.iter().map(|(_, b)| vec![0.0; b.len()]).collect(),
            v: blocks.iter().map(|(_, b)| vec![0.0; b.len()]).collect(),
        }
    }

    /// One update. Fails without touching anything if a gradient is
    /// non-finite or shaped differently from the parameters.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let blocks = flatten(grads);
        if blocks.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} blocks, gradient has {}",
                self.m.len(),
                blocks.len()
            )));
        }
        for ((name, g), m) in blocks.iter().zip(&self.m) {
            if g.len() != m.len() {
                return Err(Error::Shape(format!(
                    "gradient block {name} has the wrong size"
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient block {name}")));
            }
        }
        let clip = match self.config.clip_norm {
            Some(max) => {
                let norm = blocks
                    .iter()
                    .flat_map(|(_, g)| g.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };

        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let mut idx = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        params.visit_mut("", &mut |_, p| {
            let g = &blocks[idx].1;
            let (m, v) = (&mut ms[idx], &mut vs[idx]);
            for i in 0..p.len() {
                let gi = g[i] * clip;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= c.lr * mhat / (vhat.sqrt() + c.epsilon);
            }
            idx += 1;
        });
        Ok(())
    }
}
