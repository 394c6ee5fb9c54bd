//! Dense networks with exact reverse-mode gradients.
//!
//! Batches are row-major `Array2<f64>` with one sample per row. Every forward
//! pass returns a cache that [`Mlp::backward`] or [`Critic::backward`] consumes;
//! mutating the weights in between invalidates the cache.

pub mod adam;
pub mod checkpoint;
pub mod layer;
pub mod network;

pub use adam::AdamState;
pub use checkpoint::{Architecture, Checkpoint, NetworkRecord, TensorRecord};
pub use layer::{Activation, Dense, Layer, LayerNorm, LayerSpec};
pub use network::{
    build_actor, build_critic, soft_update, Critic, CriticCache, CriticInputGrads, Mlp, MlpCache, Parameterized,
    FULL_SCALE_HIDDEN_UNITS,
};
