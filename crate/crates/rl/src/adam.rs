use serde::{Deserialize, Serialize};

use crate::error::{Result, RlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam over a flat parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step_rows(params, grads, 0, 1, &[])
    }

    /// Lazy update for parameter vectors that start with an embedding table.
    ///
    /// Everything from `dense_from` on gets the ordinary update. Below it only
    /// the listed rows (each `row_len` wide) are touched; the moments of rows
    /// that received no gradient stay frozen instead of decaying, the usual
    /// treatment of sparse embedding gradients.
    pub fn step_rows(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        dense_from: usize,
        row_len: usize,
        rows: &[usize],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(RlError::DimensionMismatch {
                what: "adam state",
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if dense_from > params.len() || rows.iter().any(|r| (r + 1) * row_len > dense_from) {
            return Err(RlError::InvalidArgument("sparse rows outside the embedding region".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.config.beta1.powi(t);
        let bc2 = 1.0 - self.config.beta2.powi(t);
        for &r in rows {
            let span = r * row_len..(r + 1) * row_len;
            self.update(params, grads, span, bc1, bc2);
        }
        self.update(params, grads, dense_from..params.len(), bc1, bc2);
        Ok(())
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], span: std::ops::Range<usize>, bc1: f64, bc2: f64) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        for (((p, &g), m), v) in params[span.clone()]
            .iter_mut()
            .zip(&grads[span.clone()])
            .zip(self.m[span.clone()].iter_mut())
            .zip(self.v[span].iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}
