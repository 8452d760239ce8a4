use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are created on the first update and
/// must keep the same shapes afterwards.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch {
                op: "adam",
                detail: format!("{} parameters but {} gradients", params.len(), grads.len()),
            });
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| Tensor::zeros_like(g)).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam",
                detail: format!("state has {} slots, got {}", self.first.len(), params.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || m.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam",
                    detail: format!("param {:?}, grad {:?}, state {:?}", p.shape(), g.shape(), m.shape()),
                });
            }
        }

        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_model(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
        let grads: Vec<&Tensor> = grads.entries().into_iter().map(|(_, _, t)| t).collect();
        let mut slots: Vec<&mut Tensor> = params.slots_mut().into_iter().map(|(_, t)| t).collect();
        self.update(&mut slots, &grads, lr)
    }
}
