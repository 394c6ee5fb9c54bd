//! JSON weight container.
//!
//! ```text
//! {
//!   "format": "ris-ddpg-weights",
//!   "version": 1,
//!   "actor":  { "architecture": {"kind": "actor", "layers": [LayerSpec, ...]},
//!               "tensors": [{"name": "layer0.dense.weight", "shape": [out, in], "data": [...]}, ...] },
//!   "critic": { "architecture": {"kind": "critic", "state_dim": S, "action_dim": A, "hidden": H},
//!               "tensors": [...] },
//!   "metadata": { ... }
//! }
//! ```
//!
//! Tensors are listed in parameter order; `data` is row-major. Floats are
//! written with shortest round-trip formatting, so a load reproduces every bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{Layer, LayerSpec};
use super::network::{Critic, Mlp, Parameterized};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CHECKPOINT_FORMAT: &str = "ris-ddpg-weights";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Architecture {
    Actor {
        layers: Vec<LayerSpec>,
    },
    Critic {
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkRecord {
    pub architecture: Architecture,
    pub tensors: Vec<TensorRecord>,
}

fn record_tensors<P: Parameterized>(net: &P) -> Vec<TensorRecord> {
    net.tensor_shapes()
        .into_iter()
        .zip(net.tensors())
        .map(|((name, shape), data)| TensorRecord {
            name,
            shape,
            data: data.to_vec(),
        })
        .collect()
}

fn load_tensors<P: Parameterized>(net: &mut P, records: &[TensorRecord]) -> Result<()> {
    let expected = net.tensor_shapes();
    if expected.len() != records.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            records.len()
        )));
    }
    for ((name, shape), rec) in expected.iter().zip(records) {
        if *name != rec.name || *shape != rec.shape {
            return Err(Error::Checkpoint(format!(
                "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                rec.name, rec.shape
            )));
        }
        if rec.data.len() != shape.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!("tensor `{name}` has the wrong number of entries")));
        }
    }
    for (dst, rec) in net.tensors_mut().into_iter().zip(records) {
        dst.copy_from_slice(&rec.data);
    }
    if !net.is_finite() {
        return Err(Error::Checkpoint("non-finite weights".into()));
    }
    Ok(())
}

impl NetworkRecord {
    pub fn from_actor(net: &Mlp) -> Self {
        NetworkRecord {
            architecture: Architecture::Actor { layers: net.specs() },
            tensors: record_tensors(net),
        }
    }

    pub fn from_critic(net: &Critic) -> Self {
        NetworkRecord {
            architecture: Architecture::Critic {
                state_dim: net.state_dim(),
                action_dim: net.action_dim(),
                hidden: net.hidden_dim(),
            },
            tensors: record_tensors(net),
        }
    }

    pub fn to_actor(&self) -> Result<Mlp> {
        let Architecture::Actor { layers } = &self.architecture else {
            return Err(Error::Checkpoint("record does not hold an actor".into()));
        };
        if layers.iter().any(|s| s.input_dim == 0 || s.output_dim == 0) {
            return Err(Error::Checkpoint("layer dimensions must be >= 1".into()));
        }
        let mut net = Mlp::from_layers(layers.iter().map(|&s| Layer::zeros(s)).collect())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        load_tensors(&mut net, &self.tensors)?;
        Ok(net)
    }

    pub fn to_critic(&self) -> Result<Critic> {
        let Architecture::Critic {
            state_dim,
            action_dim,
            hidden,
        } = self.architecture
        else {
            return Err(Error::Checkpoint("record does not hold a critic".into()));
        };
        if state_dim == 0 || action_dim == 0 || hidden == 0 {
            return Err(Error::Checkpoint("critic dimensions must be >= 1".into()));
        }
        let mut net = Critic::zeros(state_dim, action_dim, hidden);
        load_tensors(&mut net, &self.tensors)?;
        Ok(net)
    }
}

/// Actor and critic weights plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub actor: NetworkRecord,
    pub critic: NetworkRecord,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn new(actor: &Mlp, critic: &Critic, metadata: serde_json::Value) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            actor: NetworkRecord::from_actor(actor),
            critic: NetworkRecord::from_critic(critic),
            metadata,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ckpt.version)));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn actor(&self) -> Result<Mlp> {
        self.actor.to_actor()
    }

    pub fn critic(&self) -> Result<Critic> {
        self.critic.to_critic()
    }
}
