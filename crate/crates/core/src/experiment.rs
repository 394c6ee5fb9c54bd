//! Experiment commands: each writes CSV or JSON artifacts into an output
//! directory. CSV files open with `#` comment lines carrying the seed and the
//! resolved config as JSON; JSON files embed both as fields.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::baselines::zf_on_channel;
use crate::channel::{draw_realization, ChannelRealization};
use crate::config::SystemConfig;
use crate::ddpg::train::{mean, stream_rng, Stream};
use crate::ddpg::{evaluate_policy, infer, train, EpisodeLog, EvalSet, TrainOptions};
use crate::env::{Action, EnvConfig, RisEnv, UeCount};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::neural::{Checkpoint, Mlp};

pub const CURVE_FILE: &str = "training_curve.csv";
pub const CHECKPOINT_FILE: &str = "best_checkpoint.json";
pub const CONFIG_ECHO_FILE: &str = "config.json";
pub const RATE_FILE: &str = "rate_vs_power.csv";
pub const BASELINE_FILE: &str = "baselines.csv";
pub const SWEEP_FILE: &str = "sweep_comparison.csv";

pub const CURVE_COLUMNS: [&str; 5] = ["episode", "mean_eval_reward", "best_reward_so_far", "critic_loss", "wall_time"];

/// Renders a CSV document with the seed and config comment block.
pub fn render_csv(title: &str, config: &SystemConfig, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = format!(
        "# {title}\n# seed: {}\n# config: {}\n",
        config.experiment.seed,
        config.to_json()?
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(out)
}

fn curve_row(r: &EpisodeLog) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    vec![
        r.episode.to_string(),
        r.mean_eval_reward.to_string(),
        r.best_reward_so_far.to_string(),
        opt(r.critic_loss),
        opt(r.wall_time),
    ]
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    seed: u64,
    config: &'a SystemConfig,
}

pub fn write_config_echo(config: &SystemConfig, path: &Path) -> Result<()> {
    let echo = ConfigEcho {
        seed: config.experiment.seed,
        config,
    };
    write_atomic(path, serde_json::to_string_pretty(&echo)?.as_bytes())
}

/// Frozen evaluation set of a run, drawn under the evaluation UE protocol.
pub fn eval_set(config: &SystemConfig) -> Result<EvalSet> {
    EvalSet::draw(
        &mut stream_rng(config.experiment.seed, Stream::EvalSet),
        &config.eval_env_config(),
        config.experiment.eval_set_size,
    )
}

/// Independent set for scoring finished checkpoints.
pub fn test_set(config: &SystemConfig) -> Result<EvalSet> {
    EvalSet::draw(
        &mut stream_rng(config.experiment.seed, Stream::Test),
        &config.eval_env_config(),
        config.experiment.eval_set_size,
    )
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub curve: PathBuf,
    pub checkpoint: PathBuf,
    pub best_reward: f64,
    pub best_episode: usize,
    pub actor: Mlp,
}

fn train_to_files(
    config: &SystemConfig,
    ue_count: UeCount,
    set: &EvalSet,
    curve: &Path,
    checkpoint: &Path,
) -> Result<TrainArtifacts> {
    let env = config.env_config_at(config.experiment.p_max_dbm, ue_count);
    let options = TrainOptions {
        eval_steps: config.experiment.eval_steps,
        record_wall_time: config.experiment.record_wall_time,
    };
    let title = format!("training curve ({})", ue_count.label());
    let mut rows = Vec::new();
    let outcome = train(&env, &config.rl, set, &options, config.experiment.seed, |row| {
        rows.push(curve_row(row));
        write_atomic(curve, &render_csv(&title, config, &CURVE_COLUMNS, &rows)?)
    })?;
    let metadata = serde_json::json!({
        "seed": config.experiment.seed,
        "config": config,
        "training_ue_count": ue_count,
        "best_episode": outcome.best_episode,
        "best_reward": outcome.best_reward,
    });
    Checkpoint::new(&outcome.best_actor, &outcome.best_critic, metadata).save(checkpoint)?;
    Ok(TrainArtifacts {
        curve: curve.to_path_buf(),
        checkpoint: checkpoint.to_path_buf(),
        best_reward: outcome.best_reward,
        best_episode: outcome.best_episode,
        actor: outcome.best_actor,
    })
}

/// Trains under the configured UE protocol; writes the curve, best checkpoint and config echo.
pub fn run_train(config: &SystemConfig, out: &Path) -> Result<TrainArtifacts> {
    config.validate()?;
    write_config_echo(config, &out.join(CONFIG_ECHO_FILE))?;
    let set = eval_set(config)?;
    train_to_files(
        config,
        config.experiment.ue_count,
        &set,
        &out.join(CURVE_FILE),
        &out.join(CHECKPOINT_FILE),
    )
}

/// Loads a checkpoint's actor and checks it against the config's dimensions.
pub fn load_actor(config: &SystemConfig, path: &Path) -> Result<Mlp> {
    let actor = Checkpoint::load(path)?.actor()?;
    let dims = config.env_config().dims();
    if actor.input_dim() != dims.state_len() || actor.output_dim() != dims.action_len() {
        return Err(Error::config(
            "checkpoint",
            format!(
                "actor maps {} -> {} but the config needs {} -> {}",
                actor.input_dim(),
                actor.output_dim(),
                dims.state_len(),
                dims.action_len()
            ),
        ));
    }
    Ok(actor)
}

/// Baseline means on one evaluation set at one budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineScores {
    pub random: f64,
    pub zero_forcing: f64,
    pub zf_fallbacks: usize,
}

/// Scores both baselines; the RNG streams restart per call, so every budget
/// sees the same random actions and surface phases.
pub fn score_baselines(config: &SystemConfig, env: &EnvConfig, set: &EvalSet) -> Result<BaselineScores> {
    let dims = env.dims();
    let mut rand_rng = stream_rng(config.experiment.seed, Stream::Baseline);
    let mut zf_rng = stream_rng(config.experiment.seed, Stream::ZeroForcing);
    let mut runner = RisEnv::new(env.clone());
    let (mut random, mut zf, mut fallbacks) = (Vec::new(), Vec::new(), 0);
    for e in &set.envs {
        runner.start_episode(e.channel.clone(), e.presence.clone(), e.initial_action.clone())?;
        let draws = config.experiment.baseline_draws;
        let mut total = 0.0;
        for _ in 0..draws {
            total += runner.evaluate(&Action::random(&mut rand_rng, &dims))?.reward;
        }
        random.push(total / draws as f64);
        let z = zf_on_channel(&mut zf_rng, env, &e.channel, &e.presence)?;
        fallbacks += usize::from(z.fallback);
        zf.push(z.reward);
    }
    Ok(BaselineScores {
        random: mean(&random),
        zero_forcing: mean(&zf),
        zf_fallbacks: fallbacks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub p_max_dbm: f64,
    pub ddpg: f64,
    pub baselines: BaselineScores,
}

/// Mean sum rate of a trained actor and both baselines at each budget.
pub fn evaluate_rates(config: &SystemConfig, actor: &Mlp, powers_dbm: &[f64]) -> Result<Vec<RatePoint>> {
    let set = test_set(config)?;
    powers_dbm
        .iter()
        .map(|&p| {
            let env = config.env_config_at(p, config.experiment.eval_ue_count);
            let scores = evaluate_policy(&env, &set, config.experiment.eval_steps, |s| infer(actor, s))?;
            Ok(RatePoint {
                p_max_dbm: p,
                ddpg: mean(&scores),
                baselines: score_baselines(config, &env, &set)?,
            })
        })
        .collect()
}

/// Rate-versus-power table for a checkpoint.
pub fn run_eval(config: &SystemConfig, checkpoint: &Path, powers_dbm: &[f64], out: &Path) -> Result<PathBuf> {
    config.validate()?;
    if powers_dbm.is_empty() {
        return Err(Error::config("experiment.p_max_sweep_dbm", "must list at least one power"));
    }
    let actor = load_actor(config, checkpoint)?;
    let points = evaluate_rates(config, &actor, powers_dbm)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.p_max_dbm.to_string(),
                p.ddpg.to_string(),
                p.baselines.random.to_string(),
                p.baselines.zero_forcing.to_string(),
                p.baselines.zf_fallbacks.to_string(),
            ]
        })
        .collect();
    let header = ["p_max_dbm", "ddpg_mean_rate", "random_mean_rate", "zf_mean_rate", "zf_fallbacks"];
    let path = out.join(RATE_FILE);
    write_atomic(&path, &render_csv("sum rate versus transmit power", config, &header, &rows)?)?;
    Ok(path)
}

/// Baseline-only rate-versus-power table.
pub fn run_baselines(config: &SystemConfig, out: &Path) -> Result<PathBuf> {
    config.validate()?;
    let set = test_set(config)?;
    let mut rows = Vec::new();
    for &p in &config.experiment.p_max_sweep_dbm {
        let env = config.env_config_at(p, config.experiment.eval_ue_count);
        let s = score_baselines(config, &env, &set)?;
        rows.push(vec![
            p.to_string(),
            s.random.to_string(),
            s.zero_forcing.to_string(),
            s.zf_fallbacks.to_string(),
        ]);
    }
    let header = ["p_max_dbm", "random_mean_rate", "zf_mean_rate", "zf_fallbacks"];
    let path = out.join(BASELINE_FILE);
    write_atomic(&path, &render_csv("baseline sum rates", config, &header, &rows)?)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub label: String,
    pub curve: PathBuf,
    pub checkpoint: PathBuf,
    pub best_episode: usize,
    /// Best evaluation reward seen during training.
    pub selection_reward: f64,
    /// Mean reward of the best checkpoint on the independent test set.
    pub test_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArtifacts {
    pub comparison: PathBuf,
    pub variants: Vec<SweepResult>,
    pub random_baseline: f64,
}

/// Trains one model per UE-count variant and scores every best checkpoint on
/// the same held-out test set drawn under the evaluation UE protocol.
pub fn run_sweep(config: &SystemConfig, out: &Path) -> Result<SweepArtifacts> {
    config.validate()?;
    write_config_echo(config, &out.join(CONFIG_ECHO_FILE))?;
    let selection = eval_set(config)?;
    let test = test_set(config)?;
    let eval_env = config.eval_env_config();
    let mut variants = Vec::new();
    for variant in config.sweep_variants() {
        let label = variant.label();
        let trained = train_to_files(
            config,
            variant,
            &selection,
            &out.join(format!("curve_{label}.csv")),
            &out.join(format!("checkpoint_{label}.json")),
        )?;
        let scores = evaluate_policy(&eval_env, &test, config.experiment.eval_steps, |s| {
            infer(&trained.actor, s)
        })?;
        variants.push(SweepResult {
            label,
            curve: trained.curve,
            checkpoint: trained.checkpoint,
            best_episode: trained.best_episode,
            selection_reward: trained.best_reward,
            test_reward: mean(&scores),
        });
    }
    let random_baseline = score_baselines(config, &eval_env, &test)?.random;
    let mut rows: Vec<Vec<String>> = variants
        .iter()
        .map(|v| {
            vec![
                v.label.clone(),
                v.best_episode.to_string(),
                v.selection_reward.to_string(),
                v.test_reward.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "random-action".to_string(),
        String::new(),
        String::new(),
        random_baseline.to_string(),
    ]);
    let header = ["variant", "best_episode", "selection_reward", "test_mean_reward"];
    let title = format!("UE-count sweep, test protocol {}", config.experiment.eval_ue_count.label());
    let comparison = out.join(SWEEP_FILE);
    write_atomic(&comparison, &render_csv(&title, config, &header, &rows)?)?;
    Ok(SweepArtifacts {
        comparison,
        variants,
        random_baseline,
    })
}

#[derive(Serialize)]
struct ChannelDump<'a> {
    seed: u64,
    index: usize,
    config: &'a SystemConfig,
    realization: &'a ChannelRealization,
}

/// Writes `count` seeded channel realizations, one JSON file each.
pub fn dump_channels(config: &SystemConfig, count: usize, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    if count == 0 {
        return Err(Error::config("count", "must be >= 1"));
    }
    let mut rng = stream_rng(config.experiment.seed, Stream::ChannelDump);
    let width = count.saturating_sub(1).to_string().len().max(4);
    (0..count)
        .map(|index| {
            let realization = draw_realization(&mut rng, &config.topology, &config.channel)?;
            let dump = ChannelDump {
                seed: config.experiment.seed,
                index,
                config,
                realization: &realization,
            };
            let path = out.join(format!("channel_{index:0width$}.json"));
            write_atomic(&path, serde_json::to_string(&dump)?.as_bytes())?;
            Ok(path)
        })
        .collect()
}
