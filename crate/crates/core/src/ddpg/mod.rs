//! Deep deterministic policy gradient agent and its training driver.

pub mod agent;
pub mod buffer;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{infer, Agent, AgentNets};
pub use buffer::{Minibatch, ReplayBuffer, Transition};
pub use train::{evaluate_policy, train, EpisodeLog, EvalEnv, EvalSet, TrainOptions, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    /// Episodes `I`.
    pub episodes: usize,
    /// Steps per episode `T`.
    pub steps_per_episode: usize,
    /// Discount `γ ∈ [0, 1)`.
    pub discount: f64,
    /// Soft update factor `τ ∈ (0, 1]`.
    pub soft_update: f64,
    /// Minibatch size `D`.
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Critic step size; the shared `learning_rate` when absent.
    pub critic_learning_rate: Option<f64>,
    pub buffer_capacity: usize,
    pub exploration_noise_std: f64,
    /// Width of both hidden layers in actor and critic.
    pub hidden_units: usize,
    /// Drop the bootstrap on the last minibatch slot instead of on terminal transitions.
    pub drop_last_slot_bootstrap: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            episodes: 100,
            steps_per_episode: 200,
            discount: 0.95,
            soft_update: 0.0005,
            minibatch: 128,
            learning_rate: 1e-4,
            critic_learning_rate: None,
            buffer_capacity: 100_000,
            exploration_noise_std: 0.1,
            hidden_units: 64,
            drop_last_slot_bootstrap: false,
        }
    }
}

impl Hyperparams {
    /// Full-size run: `I = 1000`, `T = 2000`, 1024-unit hidden layers.
    pub fn full_scale() -> Self {
        Hyperparams {
            episodes: 1000,
            steps_per_episode: 2000,
            hidden_units: crate::neural::FULL_SCALE_HIDDEN_UNITS,
            ..Default::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}.{name}");
        let positive = [
            ("episodes", self.episodes),
            ("steps_per_episode", self.steps_per_episode),
            ("minibatch", self.minibatch),
            ("buffer_capacity", self.buffer_capacity),
            ("hidden_units", self.hidden_units),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(field(name), "must be >= 1"));
            }
        }
        if self.minibatch > self.buffer_capacity {
            return Err(Error::config(field("minibatch"), "must not exceed buffer_capacity"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config(field("discount"), "must lie in [0, 1)"));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return Err(Error::config(field("soft_update"), "must lie in (0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(field("learning_rate"), "must be positive"));
        }
        if let Some(lr) = self.critic_learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::config(field("critic_learning_rate"), "must be positive"));
            }
        }
        if !(self.exploration_noise_std > 0.0 && self.exploration_noise_std.is_finite()) {
            return Err(Error::config(field("exploration_noise_std"), "must be positive"));
        }
        Ok(())
    }
}
