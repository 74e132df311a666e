use rlcache_rl::{DqnAgent, Transition};

use super::encode::{AdmissionState, EntryView, StateEncoder, ADMISSION_INDEX_INPUTS};
use super::reward::eviction_reward;
use super::{AgentStats, AgentsConfig};
use crate::baselines::{EvictionBook, EvictionPolicyKind, OperationType};
use crate::cache::{Cache, CacheEntry};
use crate::error::Error;
use crate::experience::{ExperienceStore, IncompleteExperience, Resolution, TerminationReason};
use crate::observer::{Observation, ObservationKind};
use crate::Result;

/// DQN that scans every resident entry when the cache is full and decides
/// for each, independently, whether to evict it.
///
/// A decision is watched for the entry's leftover TTL. A kept entry that is
/// scanned again closes its previous keep decision first. If the scan keeps
/// everything, the least recently used entry is evicted so the insert can
/// proceed.
#[derive(Debug, Clone)]
pub struct EvictionAgent {
    dqn: DqnAgent,
    encoder: StateEncoder,
    /// Action is `true` for evict.
    store: ExperienceStore<bool>,
    fallback: EvictionBook,
    stats: AgentStats,
    fallbacks: u64,
}

impl EvictionAgent {
    pub fn new(config: &AgentsConfig, max_ttl: f64, seed: u64) -> Result<Self> {
        let encoder = config.encoder(max_ttl)?;
        let emb = encoder.embedding(config.embedding_dim, &ADMISSION_INDEX_INPUTS);
        let dqn = DqnAgent::new(config.dqn.clone(), AdmissionState::LEN, Some(emb), 2, seed)?;
        Ok(Self {
            dqn,
            encoder,
            store: ExperienceStore::new(),
            fallback: EvictionBook::new(EvictionPolicyKind::Lru),
            stats: AgentStats::default(),
            fallbacks: 0,
        })
    }

    pub fn dqn(&self) -> &DqnAgent {
        &self.dqn
    }

    pub fn dqn_mut(&mut self) -> &mut DqnAgent {
        &mut self.dqn
    }

    pub fn stats(&self) -> AgentStats {
        AgentStats {
            train_steps: self.dqn.train_steps(),
            ..self.stats
        }
    }

    /// Scans that kept everything and fell back to LRU.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    pub fn pending(&self) -> usize {
        self.store.len()
    }

    pub fn is_tracking(&self, key: &str) -> bool {
        self.store.contains(key)
    }

    /// State of a resident entry at `now`.
    pub fn encode(&mut self, entry: &CacheEntry, now: f64) -> AdmissionState {
        self.encoder.admission(&EntryView {
            key: &entry.key,
            op: OperationType::Read,
            values: &entry.values,
            ttl: entry.remaining(now),
            retrieval_time: entry.retrieval_time,
            hit_count: entry.hit_count,
        })
    }

    /// Returns the keys to evict, in key order. Entries are scanned in key
    /// order so the result does not depend on hash-map layout.
    pub fn scan(&mut self, cache: &Cache, now: f64) -> Result<Vec<String>> {
        if cache.is_empty() {
            return Err(Error::Precondition("eviction scan on an empty cache".into()));
        }
        let mut entries: Vec<&CacheEntry> = cache.entries().collect();
        entries.sort_unstable_by(|a, b| a.key.cmp(&b.key));
        let mut victims = Vec::new();
        for entry in entries {
            if let Some(prev) = self.store.complete(&entry.key, TerminationReason::Expired, now) {
                self.learn(prev)?;
            }
            let state = self.encode(entry, now);
            let evict = self.dqn.act(state.as_slice())? == 1;
            self.store.track(IncompleteExperience::new(
                entry.key.clone(),
                state.to_vec(),
                evict,
                now,
                entry.remaining(now),
            ))?;
            self.stats.decisions += 1;
            if evict {
                victims.push(entry.key.clone());
            }
        }
        if victims.is_empty() {
            let victim = self.fallback.select_victim()?.to_owned();
            if let Some(kept) = self.store.complete(&victim, TerminationReason::Evicted, now) {
                self.learn(kept)?;
            }
            self.fallbacks += 1;
            victims.push(victim);
        }
        Ok(victims)
    }

    pub fn on_observation(&mut self, obs: &Observation) -> Result<()> {
        self.fallback.observe(obs);
        // Evictions are this agent's own doing; their outcome comes later.
        if obs.kind == ObservationKind::EvictionDecision {
            return Ok(());
        }
        if let Resolution::Completed(exp) = self.store.resolve(&obs.key, obs.kind, obs.at) {
            self.learn(exp)?;
        }
        Ok(())
    }

    pub fn sweep(&mut self, now: f64) -> Result<()> {
        for exp in self.store.sweep(now) {
            self.learn(exp)?;
        }
        Ok(())
    }

    fn learn(&mut self, exp: IncompleteExperience<bool>) -> Result<()> {
        let reward = eviction_reward(&exp)?;
        let state = AdmissionState::from_slice(exp.state())?;
        let next = state.with_outcome(exp.termination(), self.encoder.scale_hits(exp.hit_count()));
        self.dqn.observe(Transition {
            state: state.to_vec(),
            action: exp.action as usize,
            reward,
            next_state: next.to_vec(),
            continuing: false,
        })?;
        self.stats.rewarded(reward);
        Ok(())
    }
}
