use ganmut_autograd::Tensor;
use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer over a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub(crate) config: AdamConfig,
    pub(crate) steps: u64,
    pub(crate) first: Vec<Vec<f64>>,
    pub(crate) second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Adam {
            config,
            steps: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_tensors(config: AdamConfig, tensors: &[Tensor]) -> Self {
        let sizes: Vec<usize> = tensors.iter().map(Tensor::numel).collect();
        Adam::new(config, &sizes)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Returns updated copies of `values` given their gradients.
    pub fn update(&mut self, values: &[Tensor], grads: &[Tensor]) -> Result<Vec<ArrayD<f64>>> {
        if values.len() != self.first.len() || grads.len() != values.len() {
            return Err(validation("optimizer state does not match parameter list"));
        }
        self.steps += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.steps as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let mut out = Vec::with_capacity(values.len());
        for (i, (value, g)) in values.iter().zip(grads).enumerate() {
            if value.shape() != g.shape() || self.first[i].len() != value.numel() {
                return Err(validation(format!("gradient #{i} has the wrong shape")));
            }
            let mut next = value.data().clone();
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            let slots = next.as_slice_mut().expect("standard layout");
            for (j, (p, &gj)) in slots.iter_mut().zip(g.values()).enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let step = (m[j] / bias1) / ((v[j] / bias2).sqrt() + eps);
                *p -= learning_rate * step;
            }
            out.push(next);
        }
        Ok(out)
    }
}
