use serde::{Deserialize, Serialize};

use super::{Gradients, Network, NnError};

/// Bias-corrected Adam over a network's parameter slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Moment accumulators shaped after `net`; beta2/eps use the standard
    /// 0.999 / 1e-8.
    pub fn new(learning_rate: f64, beta1: f64, net: &Network) -> Self {
        let shapes: Vec<Vec<f64>> = net
            .param_slices()
            .iter()
            .map(|s| vec![0.0; s.len()])
            .collect();
        Self {
            learning_rate,
            beta1,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update: `p -= lr * m_hat / (sqrt(v_hat) + eps)` per parameter.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<(), NnError> {
        let mut params = net.param_slices_mut();
        if params.len() != grads.slices.len() || params.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                layer: "adam".to_string(),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, slice) in params.iter_mut().enumerate() {
            let g = &grads.slices[i];
            if g.len() != slice.len() {
                return Err(NnError::ShapeMismatch {
                    layer: "adam".to_string(),
                });
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..slice.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                slice[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
