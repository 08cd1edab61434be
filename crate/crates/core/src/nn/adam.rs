use serde::{Deserialize, Serialize};

use super::{Gradient, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam state for one network.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    first: Gradient,
    second: Gradient,
    step: u64,
}

impl Adam {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradient::zeros_like(net),
            second: Gradient::zeros_like(net),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Non-finite gradients are rejected before any
    /// state changes.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradient) -> Result<()> {
        let expected = Gradient::zeros_like(net);
        if grads.weights.len() != expected.weights.len()
            || grads
                .weights
                .iter()
                .zip(&expected.weights)
                .any(|(a, b)| a.rows() != b.rows() || a.cols() != b.cols())
            || grads.biases.iter().zip(&expected.biases).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::shape(
                "adam gradient",
                format!("{:?}", net.layer_sizes()),
                "incongruent gradient",
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("adam gradient"));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let g = grads.to_flat();
        for (((p, m), v), gi) in net
            .values_mut()
            .zip(self.first.values_mut())
            .zip(self.second.values_mut())
            .zip(&g)
        {
            *m = beta1 * *m + (1.0 - beta1) * gi;
            *v = beta2 * *v + (1.0 - beta2) * gi * gi;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
