use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{infer, Agent, AgentNets};
use super::buffer::{ReplayBuffer, Transition};
use super::Hyperparams;
use crate::channel::{self, ChannelRealization};
use crate::env::{presence_from_counts, Action, EnvConfig, RisEnv};
use crate::error::{Error, Result};
use crate::neural::{Critic, Mlp};

/// Independent RNG streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 0,
    Environment = 1,
    Exploration = 2,
    Replay = 3,
    EvalSet = 4,
    Baseline = 5,
    ZeroForcing = 6,
    Test = 7,
    ChannelDump = 8,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One frozen evaluation environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEnv {
    pub channel: ChannelRealization,
    pub presence: Vec<bool>,
    pub initial_action: Action,
}

/// Held-out environments shared by every evaluation in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub envs: Vec<EvalEnv>,
}

impl EvalSet {
    /// Draws `size` environments in the same order a reset would.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, config: &EnvConfig, size: usize) -> Result<Self> {
        let dims = config.dims();
        let mut envs = Vec::with_capacity(size);
        for _ in 0..size {
            let counts = config.ue_count.draw(rng, config.topology.num_ris);
            let presence = presence_from_counts(&counts, config.topology.ue_slots_per_ris);
            let channel = channel::draw_realization(rng, &config.topology, &config.channel)?;
            let initial_action = Action::random(rng, &dims);
            envs.push(EvalEnv {
                channel,
                presence,
                initial_action,
            });
        }
        Ok(EvalSet { envs })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }
}

/// Rolls `policy` for `steps` steps from each environment's initial state and
/// returns the per-environment mean reward, in set order.
pub fn evaluate_policy<F>(config: &EnvConfig, set: &EvalSet, steps: usize, mut policy: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if steps == 0 {
        return Err(Error::config("experiment.eval_steps", "must be >= 1"));
    }
    let dims = config.dims();
    let mut env = RisEnv::new(config.clone());
    set.envs
        .iter()
        .map(|e| {
            let mut state = env.start_episode(e.channel.clone(), e.presence.clone(), e.initial_action.clone())?;
            let mut total = 0.0;
            for _ in 0..steps {
                let action = Action::new(&dims, policy(&state.to_vector())?)?;
                let out = env.step(&action)?;
                total += out.reward;
                state = out.state;
            }
            Ok(total / steps as f64)
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Policy steps per evaluation environment.
    pub eval_steps: usize,
    pub record_wall_time: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            eval_steps: 10,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    /// 1-based.
    pub episode: usize,
    pub mean_eval_reward: f64,
    pub best_reward_so_far: f64,
    /// Mean critic loss over the episode's updates; `None` before updates start.
    pub critic_loss: Option<f64>,
    pub mean_train_reward: f64,
    /// Seconds since the start of training.
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_actor: Mlp,
    pub best_critic: Critic,
    pub best_reward: f64,
    pub best_episode: usize,
    pub log: Vec<EpisodeLog>,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
}

/// Runs the full training loop and keeps the weights with the highest mean
/// evaluation reward. `on_episode` sees each log row as soon as it exists.
pub fn train<F>(
    config: &EnvConfig,
    hp: &Hyperparams,
    eval_set: &EvalSet,
    options: &TrainOptions,
    seed: u64,
    mut on_episode: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpisodeLog) -> Result<()>,
{
    hp.validate("rl")?;
    if eval_set.is_empty() {
        return Err(Error::config("experiment.eval_set_size", "must be >= 1"));
    }
    let dims = config.dims();
    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut env_rng = stream_rng(seed, Stream::Environment);
    let mut noise_rng = stream_rng(seed, Stream::Exploration);
    let mut replay_rng = stream_rng(seed, Stream::Replay);

    let nets = AgentNets::init(&mut init_rng, dims.state_len(), dims.action_len(), hp.hidden_units)?;
    let mut agent = Agent::new(nets, hp);
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity)?;
    let mut env = RisEnv::new(config.clone());
    let started = Instant::now();

    let mut best: Option<(Mlp, Critic, f64, usize)> = None;
    let mut log = Vec::with_capacity(hp.episodes);

    for episode in 1..=hp.episodes {
        let mut state = env.reset(&mut env_rng)?.to_vector();
        let (mut loss_sum, mut updates, mut reward_sum) = (0.0, 0usize, 0.0);
        for t in 1..=hp.steps_per_episode {
            let raw = agent.nets.select_action(&state, hp.exploration_noise_std, &mut noise_rng)?;
            let out = env.step(&Action::new(&dims, raw.clone())?)?;
            let next = out.state.to_vector();
            reward_sum += out.reward;
            buffer.push(Transition {
                state,
                action: raw,
                reward: out.reward,
                next_state: next.clone(),
                terminal: t == hp.steps_per_episode,
            });
            if buffer.len() >= hp.minibatch {
                let batch = buffer.sample(&mut replay_rng, hp.minibatch)?;
                let targets = agent.nets.td_targets(&batch, hp.discount, hp.drop_last_slot_bootstrap)?;
                let loss = agent.critic_update(&batch, &targets)?;
                if !loss.is_finite() {
                    return Err(Error::State(format!("critic loss diverged in episode {episode}")));
                }
                agent.actor_update(&batch)?;
                agent.nets.soft_update(hp.soft_update);
                loss_sum += loss;
                updates += 1;
            }
            state = next;
        }

        let actor = &agent.nets.actor;
        let scores = evaluate_policy(config, eval_set, options.eval_steps, |s| infer(actor, s))?;
        let score = mean(&scores);
        if best.as_ref().is_none_or(|b| score > b.2) {
            best = Some((actor.clone(), agent.nets.critic.clone(), score, episode));
        }
        let row = EpisodeLog {
            episode,
            mean_eval_reward: score,
            best_reward_so_far: best.as_ref().map_or(score, |b| b.2),
            critic_loss: (updates > 0).then(|| loss_sum / updates as f64),
            mean_train_reward: reward_sum / hp.steps_per_episode as f64,
            wall_time: options.record_wall_time.then(|| started.elapsed().as_secs_f64()),
        };
        on_episode(&row)?;
        log.push(row);
    }

    let (best_actor, best_critic, best_reward, best_episode) = best.expect("at least one episode");
    Ok(TrainOutcome {
        best_actor,
        best_critic,
        best_reward,
        best_episode,
        log,
        agent,
        buffer,
    })
}
