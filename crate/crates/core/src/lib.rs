//! Multi-RIS-aided multiuser MISO downlink simulation with a DDPG precoding agent.
//!
//! The crate is organised bottom-up:
//!
//! * [`complexlin`] dense complex matrices;
//! * [`channel`] Saleh–Valenzuela link synthesis and the effective channel;
//! * [`ris`] ideal and practical (phase-dependent amplitude) reflection;
//! * [`env`] the decision process: action/state layouts, feasibility projection, rates;
//! * [`neural`] dense networks with layer normalization, exact gradients and Adam;
//! * [`ddpg`] the actor–critic agent and its training driver;
//! * [`baselines`] random and zero-forcing reference points;
//! * [`config`] and [`experiment`] the reproducible experiment driver behind the CLI.

pub mod complexlin;
pub mod config;
pub mod ddpg;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod experiment;
pub mod io;
pub mod neural;
pub mod ris;

pub use error::{Error, Result};
