//! Reinforcement-learning building blocks written from scratch on `f64`
//! slices: a multilayer perceptron with optional embeddings, Adam, a replay
//! buffer, an epsilon schedule, a DQN agent and a soft actor-critic agent.
//!
//! Everything is deterministic given its seed, so identical seeds and
//! identical transition streams reproduce parameter trajectories bit for bit.

pub mod adam;
pub mod checkpoint;
pub mod dqn;
pub mod epsilon;
pub mod error;
pub mod mlp;
pub mod replay;
pub mod sac;
pub mod toy;
pub mod vocab;

pub use adam::{Adam, AdamConfig};
pub use dqn::{argmax, DqnAgent, DqnConfig};
pub use epsilon::EpsilonSchedule;
pub use error::{Result, RlError};
pub use mlp::{EmbeddingSpec, GradBuffer, Mlp, MlpSpec, Trace};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{SacAgent, SacConfig, SacLosses};
pub use vocab::{Vocabulary, OOV_INDEX};
