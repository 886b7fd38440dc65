use serde::{Deserialize, Serialize};

use super::{ModelParams, ParamGrads};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
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

/// Adam with bias correction. Moments are laid out like
/// [`ModelParams::slices_mut`].
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Adam {
        Adam {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads, lr: f64) -> Result<()> {
        let grad_slices = grads.slices();
        if grad_slices.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::Diverged { epoch: 0, what: "gradient" });
        }
        let mut param_slices = params.slices_mut();
        if param_slices.len() != grad_slices.len()
            || param_slices.iter().zip(&grad_slices).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("gradient layout differs from parameters".into()));
        }
        if self.m.is_empty() {
            self.m = grad_slices.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (((p, g), m), v) in param_slices
            .iter_mut()
            .zip(&grad_slices)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
