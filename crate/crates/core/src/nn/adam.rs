use serde::{Deserialize, Serialize};

use crate::error::{shape, Result};

/// Adam optimizer with bias-corrected moments, one accumulator pair per
/// parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed accumulators shaped like `shapes` (lengths of the flat tensors).
    pub fn new(shapes: &[usize], learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            ));
        }
        for (idx, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[idx].len() || g.len() != p.len() {
                return shape(format!(
                    "tensor {idx}: {} parameters, {} gradients, {} accumulators",
                    p.len(),
                    g.len(),
                    self.first_moment[idx].len()
                ));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (idx, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
