//! Learning strategies: DQN admission and eviction, SAC TTL estimation and a
//! SAC multi-task agent that covers all three decisions.
//!
//! Every decision is tracked as an incomplete experience. When its outcome
//! arrives (or its watch window runs out) the agent computes the reward,
//! pushes the transition into its replay buffer and may take a train step.
//! Each decision is a one-step episode: the transition is terminal.

mod admission;
mod encode;
mod eviction;
mod multitask;
mod reward;
mod ttl;

pub use admission::AdmissionAgent;
pub use encode::{
    AdmissionState, EntryView, FeatureScales, MultiTaskState, StateEncoder, TtlState, ADMISSION_INDEX_INPUTS,
    MULTITASK_INDEX_INPUTS, TTL_INDEX_INPUTS,
};
pub use eviction::EvictionAgent;
pub use multitask::MultiTaskAgent;
pub use ttl::TtlAgent;
pub use reward::{
    admission_reward, eviction_reward, multitask_events, multitask_return, multitask_reward, ttl_reward,
    AdmissionDecision, AdmissionRewardConfig, MultiTaskAction, MultiTaskContext, MultiTaskDecision, MultiTaskEvent,
    TtlDecision,
};

use rlcache_rl::{DqnConfig, SacConfig};
use serde::{Deserialize, Serialize};

/// Hyperparameters shared by the learning strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub dqn: DqnConfig,
    pub sac: SacConfig,
    pub embedding_dim: usize,
    pub vocab_cap: usize,
    pub max_size: f64,
    pub max_retrieval: f64,
    pub max_hits: f64,
    pub admission_reward: AdmissionRewardConfig,
    /// Seconds; the multi-task agent caches iff its TTL estimate exceeds this.
    pub cache_threshold: f64,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        Self {
            dqn: DqnConfig::default(),
            sac: SacConfig::default(),
            embedding_dim: 16,
            vocab_cap: 16_384,
            max_size: 1000.0,
            max_retrieval: 0.1,
            max_hits: 100.0,
            admission_reward: AdmissionRewardConfig::default(),
            cache_threshold: 1.0,
        }
    }
}

impl AgentsConfig {
    pub fn scales(&self, max_ttl: f64) -> FeatureScales {
        FeatureScales {
            max_size: self.max_size,
            max_ttl,
            max_retrieval: self.max_retrieval,
            max_hits: self.max_hits,
        }
    }

    pub(crate) fn encoder(&self, max_ttl: f64) -> crate::Result<StateEncoder> {
        StateEncoder::new(self.vocab_cap, self.scales(max_ttl))
    }
}

/// Running totals every agent keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub decisions: u64,
    pub rewards: u64,
    pub reward_sum: f64,
    pub train_steps: u64,
}

impl AgentStats {
    fn rewarded(&mut self, r: f64) {
        self.rewards += 1;
        self.reward_sum += r;
    }
}
