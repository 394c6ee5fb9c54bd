//! Experiment configuration: one TOML document with a section per subsystem.
//!
//! ```toml
//! [topology]
//! bs_antennas = 16
//! num_ris = 4
//!
//! [channel.path_loss]
//! ris_gain = 1000.0
//!
//! [reflection]
//! mode = "practical"
//!
//! [rl]
//! episodes = 100
//!
//! [experiment]
//! seed = 7
//! ue_count = { mode = "random", min = 1, max = 4 }
//! ```
//!
//! Every section and field is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, ChannelParams, Topology};
use crate::ddpg::Hyperparams;
use crate::env::{EnvConfig, UeCount};
use crate::error::{Error, Result};
use crate::ris::{ReflectionMode, ReflectionParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub seed: u64,
    /// Held-out evaluation environments.
    pub eval_set_size: usize,
    /// Policy steps rolled out per evaluation environment.
    pub eval_steps: usize,
    /// Transmit budget for training, dBm.
    pub p_max_dbm: f64,
    /// Budgets evaluated by `eval` and `baselines`, dBm.
    pub p_max_sweep_dbm: Vec<f64>,
    /// UE counts during training.
    pub ue_count: UeCount,
    /// UE counts of the held-out evaluation set.
    pub eval_ue_count: UeCount,
    /// Training variants compared by `sweep`; defaults to half-full, full and random surfaces.
    pub sweep_variants: Option<Vec<UeCount>>,
    /// Fill the training log's `wall_time` column (makes logs run-dependent).
    pub record_wall_time: bool,
    /// Draws per environment for the random baseline.
    pub baseline_draws: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            seed: 1,
            eval_set_size: 100,
            eval_steps: 10,
            p_max_dbm: 20.0,
            p_max_sweep_dbm: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            ue_count: UeCount::Random { min: 1, max: 4 },
            eval_ue_count: UeCount::Random { min: 1, max: 4 },
            sweep_variants: None,
            record_wall_time: false,
            baseline_draws: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub topology: Topology,
    pub channel: ChannelParams,
    pub reflection: ReflectionParams,
    pub rl: Hyperparams,
    pub experiment: ExperimentParams,
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SystemConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }

    /// Compact JSON rendering embedded in output artifacts.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Full-size run lengths, network width and evaluation set.
    pub fn apply_full_scale(&mut self) {
        let full = Hyperparams::full_scale();
        self.rl.episodes = full.episodes;
        self.rl.steps_per_episode = full.steps_per_episode;
        self.rl.hidden_units = full.hidden_units;
        self.experiment.eval_set_size = 1000;
    }

    pub fn set_mode(&mut self, mode: ReflectionMode) {
        self.reflection.mode = mode;
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate("topology")?;
        self.channel.validate("channel")?;
        self.reflection.validate("reflection")?;
        self.rl.validate("rl")?;
        let exp = &self.experiment;
        let slots = self.topology.ue_slots_per_ris;
        if exp.eval_set_size == 0 {
            return Err(Error::config("experiment.eval_set_size", "must be >= 1"));
        }
        if exp.eval_steps == 0 {
            return Err(Error::config("experiment.eval_steps", "must be >= 1"));
        }
        if exp.baseline_draws == 0 {
            return Err(Error::config("experiment.baseline_draws", "must be >= 1"));
        }
        if !exp.p_max_dbm.is_finite() {
            return Err(Error::config("experiment.p_max_dbm", "must be finite"));
        }
        if exp.p_max_sweep_dbm.is_empty() {
            return Err(Error::config("experiment.p_max_sweep_dbm", "must list at least one power"));
        }
        if let Some(i) = exp.p_max_sweep_dbm.iter().position(|p| !p.is_finite()) {
            return Err(Error::config(format!("experiment.p_max_sweep_dbm[{i}]"), "must be finite"));
        }
        exp.ue_count.validate("experiment.ue_count", slots)?;
        exp.eval_ue_count.validate("experiment.eval_ue_count", slots)?;
        for (i, v) in self.sweep_variants().iter().enumerate() {
            v.validate(&format!("experiment.sweep_variants[{i}]"), slots)?;
        }
        Ok(())
    }

    pub fn sweep_variants(&self) -> Vec<UeCount> {
        match &self.experiment.sweep_variants {
            Some(v) => v.clone(),
            None => {
                let slots = self.topology.ue_slots_per_ris;
                let mut variants = vec![UeCount::Fixed { count: slots.div_ceil(2) }];
                if slots > 1 {
                    variants.push(UeCount::Fixed { count: slots });
                    variants.push(UeCount::Random { min: 1, max: slots });
                }
                variants
            }
        }
    }

    /// Environment for training, at the configured budget.
    pub fn env_config(&self) -> EnvConfig {
        self.env_config_at(self.experiment.p_max_dbm, self.experiment.ue_count)
    }

    pub fn env_config_at(&self, p_max_dbm: f64, ue_count: UeCount) -> EnvConfig {
        EnvConfig {
            topology: self.topology.clone(),
            channel: self.channel.clone(),
            reflection: self.reflection,
            p_max: dbm_to_watts(p_max_dbm),
            ue_count,
        }
    }

    /// Environment matching the held-out evaluation protocol.
    pub fn eval_env_config(&self) -> EnvConfig {
        self.env_config_at(self.experiment.p_max_dbm, self.experiment.eval_ue_count)
    }
}
