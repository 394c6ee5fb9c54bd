use serde::{Deserialize, Serialize};

use super::network::Parameterized;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new<P: Parameterized>(params: &P, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// One descent step `θ ← θ − α·m̂/(√v̂ + ε)`.
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grad_tensors = grads.tensors();
        let lens_match = |t: &[Vec<f64>]| {
            t.len() == grad_tensors.len() && t.iter().zip(&grad_tensors).all(|(a, b)| a.len() == b.len())
        };
        if !lens_match(&self.first_moment) {
            return Err(Error::Shape("gradient tensors do not match the optimizer state".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let mut param_tensors = params.tensors_mut();
        if param_tensors.len() != grad_tensors.len() {
            return Err(Error::Shape("parameter and gradient tensor counts differ".into()));
        }
        for (((p, g), m), v) in param_tensors
            .iter_mut()
            .zip(&grad_tensors)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            if p.len() != g.len() {
                return Err(Error::Shape("parameter and gradient tensor sizes differ".into()));
            }
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / correction1;
                let v_hat = *vi / correction2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
