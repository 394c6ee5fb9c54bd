//! Command-line driver for training, evaluation and baseline runs.
//!
//! Exit status: 0 on success, 1 for invalid configuration or arguments,
//! 2 for failures while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_ddpg::config::SystemConfig;
use ris_ddpg::experiment;
use ris_ddpg::ris::ReflectionMode;
use ris_ddpg::Error;

#[derive(Parser, Debug)]
#[command(name = "ris-ddpg", version, about = "Multi-RIS downlink simulation with a DDPG precoding agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an agent and write its curve and best checkpoint.
    Train(Common),
    /// Evaluate a checkpoint against the baselines over transmit powers.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated dBm values; defaults to the config's sweep list.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        powers: Option<Vec<f64>>,
    },
    /// Train one agent per UE-count variant and compare them.
    Sweep(Common),
    /// Write seeded channel realizations as JSON.
    DumpChannels {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Score the random and zero-forcing baselines over transmit powers.
    Baselines(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Full-size episodes, steps, network width and evaluation set.
    #[arg(long = "paper-scale")]
    full_scale: bool,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Ideal,
    Practical,
}

impl Common {
    fn resolve(&self) -> Result<SystemConfig, Error> {
        let mut config = match &self.config {
            Some(path) => SystemConfig::load(path)?,
            None => SystemConfig::default(),
        };
        if self.full_scale {
            config.apply_full_scale();
        }
        if let Some(seed) = self.seed {
            config.experiment.seed = seed;
        }
        if let Some(mode) = self.mode {
            config.set_mode(match mode {
                Mode::Ideal => ReflectionMode::Ideal,
                Mode::Practical => ReflectionMode::Practical,
            });
        }
        config.validate()?;
        Ok(config)
    }
}

fn show(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(common) => {
            let config = common.resolve()?;
            let art = experiment::run_train(&config, &common.out)?;
            show(&art.curve);
            show(&art.checkpoint);
            println!("best mean evaluation reward {:.4} at episode {}", art.best_reward, art.best_episode);
        }
        Command::Eval {
            common,
            checkpoint,
            powers,
        } => {
            let config = common.resolve()?;
            let powers = powers.unwrap_or_else(|| config.experiment.p_max_sweep_dbm.clone());
            show(&experiment::run_eval(&config, &checkpoint, &powers, &common.out)?);
        }
        Command::Sweep(common) => {
            let config = common.resolve()?;
            let art = experiment::run_sweep(&config, &common.out)?;
            for v in &art.variants {
                println!("{:<16} test mean reward {:.4}", v.label, v.test_reward);
            }
            println!("{:<16} test mean reward {:.4}", "random-action", art.random_baseline);
            show(&art.comparison);
        }
        Command::DumpChannels { common, count } => {
            let config = common.resolve()?;
            let files = experiment::dump_channels(&config, count, &common.out)?;
            println!("wrote {} channel file(s) to {}", files.len(), common.out.display());
        }
        Command::Baselines(common) => {
            let config = common.resolve()?;
            show(&experiment::run_baselines(&config, &common.out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
