use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::buffer::Minibatch;
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::neural::{build_actor, build_critic, soft_update, AdamState, Critic, Mlp};

/// Policy and target actor–critic pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNets {
    pub actor: Mlp,
    pub critic: Critic,
    pub target_actor: Mlp,
    pub target_critic: Critic,
}

impl AgentNets {
    /// Random policy networks; targets start as exact copies.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, action_dim: usize, hidden: usize) -> Result<Self> {
        let actor = build_actor(rng, state_dim, action_dim, hidden)?;
        let critic = build_critic(rng, state_dim, action_dim, hidden)?;
        Ok(Self::from_policy(actor, critic))
    }

    pub fn from_policy(actor: Mlp, critic: Critic) -> Self {
        AgentNets {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }

    /// `π(s) + n` with `n ~ N(0, noise_std²)` per component, unclipped.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.actor.predict(state)?;
        if noise_std > 0.0 {
            let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Domain(e.to_string()))?;
            for v in &mut a {
                *v += noise.sample(rng);
            }
        }
        Ok(a)
    }

    /// `yᵢ = rᵢ + γ·Q′(s′ᵢ, π′(s′ᵢ))`, with the bootstrap dropped on terminal
    /// transitions, or on the last minibatch slot when `literal_last_index` is set.
    pub fn td_targets(&self, batch: &Minibatch, gamma: f64, literal_last_index: bool) -> Result<Array1<f64>> {
        if batch.is_empty() {
            return Err(Error::Shape("empty minibatch".into()));
        }
        let next_actions = self.target_actor.forward(&batch.next_states)?;
        let q_next = self.target_critic.forward(&batch.next_states, next_actions.output())?.q();
        let last = batch.len() - 1;
        Ok(Array1::from_iter((0..batch.len()).map(|i| {
            let drop = if literal_last_index { i == last } else { batch.terminal[i] };
            if drop {
                batch.rewards[i]
            } else {
                batch.rewards[i] + gamma * q_next[i]
            }
        })))
    }

    /// `θ′ ← τθ + (1 − τ)θ′` for both target networks.
    pub fn soft_update(&mut self, tau: f64) {
        soft_update(&mut self.target_actor, &self.actor, tau);
        soft_update(&mut self.target_critic, &self.critic, tau);
    }
}

/// Deterministic policy output.
pub fn infer(actor: &Mlp, state: &[f64]) -> Result<Vec<f64>> {
    actor.predict(state)
}

/// Networks plus one optimizer per policy network.
#[derive(Debug, Clone)]
pub struct Agent {
    pub nets: AgentNets,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl Agent {
    pub fn new(nets: AgentNets, hp: &Hyperparams) -> Self {
        Agent {
            actor_opt: AdamState::new(&nets.actor, hp.learning_rate),
            critic_opt: AdamState::new(&nets.critic, hp.critic_learning_rate.unwrap_or(hp.learning_rate)),
            nets,
        }
    }

    /// One Adam step on `(1/D)·Σ(Q(sᵢ, aᵢ) − yᵢ)²`; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &Minibatch, targets: &Array1<f64>) -> Result<f64> {
        if targets.len() != batch.len() {
            return Err(Error::Shape("one target per minibatch sample is required".into()));
        }
        let critic = &mut self.nets.critic;
        let cache = critic.forward(&batch.states, &batch.actions)?;
        let err = cache.q() - targets;
        let n = batch.len() as f64;
        let loss = err.dot(&err) / n;
        let dq = err * (2.0 / n);
        let (_, grads) = critic.backward(&cache, &dq)?;
        self.critic_opt.step(critic, &grads)?;
        Ok(loss)
    }

    /// One Adam ascent step on `(1/D)·Σ Q(sᵢ, π(sᵢ))` through the actor only;
    /// returns the objective before the step.
    pub fn actor_update(&mut self, batch: &Minibatch) -> Result<f64> {
        let critic = &self.nets.critic;
        let (objective, grads) = policy_gradient(&self.nets.actor, &batch.states, |actions| {
            critic_action_gradient(critic, &batch.states, actions)
        })?;
        self.actor_opt.step(&mut self.nets.actor, &grads)?;
        Ok(objective)
    }
}

/// Mean critic value over a batch of actions and its gradient with respect to
/// each action row.
pub fn critic_action_gradient(critic: &Critic, states: &Array2<f64>, actions: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let cache = critic.forward(states, actions)?;
    let n = states.nrows() as f64;
    let objective = cache.q().sum() / n;
    let dq = Array1::from_elem(states.nrows(), 1.0 / n);
    Ok((objective, critic.backward_inputs(&cache, &dq)?.action))
}

/// Gradient of `−J(θ^π)` with respect to the actor parameters, where `J` and
/// `∂J/∂a` come from `objective` evaluated at the actor's actions. Returns `J`
/// alongside the gradient so that a descent step on it ascends `J`.
pub fn policy_gradient<F>(actor: &Mlp, states: &Array2<f64>, objective: F) -> Result<(f64, Mlp)>
where
    F: FnOnce(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
{
    let cache = actor.forward(states)?;
    let (value, d_action) = objective(cache.output())?;
    let (_, grads) = actor.backward(&cache, &(-d_action))?;
    Ok((value, grads))
}
