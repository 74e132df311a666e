use rlcache_rl::{SacAgent, Transition};

use super::encode::{EntryView, MultiTaskState, StateEncoder, MULTITASK_INDEX_INPUTS};
use super::reward::{multitask_return, MultiTaskAction, MultiTaskContext, MultiTaskDecision};
use super::{AgentStats, AgentsConfig};
use crate::baselines::{EvictionBook, EvictionPolicyKind, OperationType};
use crate::cache::{Cache, CacheEntry};
use crate::error::Error;
use crate::experience::{ExperienceStore, IncompleteExperience, Resolution, TerminationReason};
use crate::observer::{Observation, ObservationKind};
use crate::Result;

/// One SAC network emitting an eviction score and a TTL estimate. Admission
/// caches iff the estimate is above the threshold and uses it as the TTL;
/// eviction scans evict entries whose score rounds to 1.
///
/// A scan completes one experience per resident, so training is paced at
/// one step per admission (scans only run inside admissions) rather than
/// one per transition.
#[derive(Debug, Clone)]
pub struct MultiTaskAgent {
    sac: SacAgent,
    encoder: StateEncoder,
    admissions: ExperienceStore<MultiTaskDecision>,
    scans: ExperienceStore<MultiTaskDecision>,
    fallback: EvictionBook,
    threshold: f64,
    max_ttl: f64,
    stats: AgentStats,
}

impl MultiTaskAgent {
    pub fn new(config: &AgentsConfig, max_ttl: f64, seed: u64) -> Result<Self> {
        if !(max_ttl > 0.0) {
            return Err(Error::InvalidArgument("max_ttl must be positive".into()));
        }
        let encoder = config.encoder(max_ttl)?;
        let emb = encoder.embedding(config.embedding_dim, &MULTITASK_INDEX_INPUTS);
        let sac = SacAgent::new(
            config.sac.clone(),
            MultiTaskState::LEN,
            Some(emb),
            vec![0.0, 0.0],
            vec![1.0, max_ttl],
            seed,
        )?;
        Ok(Self {
            sac,
            encoder,
            admissions: ExperienceStore::new(),
            scans: ExperienceStore::new(),
            fallback: EvictionBook::new(EvictionPolicyKind::Lru),
            threshold: config.cache_threshold,
            max_ttl,
            stats: AgentStats::default(),
        })
    }

    pub fn sac(&self) -> &SacAgent {
        &self.sac
    }

    pub fn stats(&self) -> AgentStats {
        AgentStats {
            train_steps: self.sac.train_steps(),
            ..self.stats
        }
    }

    pub fn pending(&self) -> usize {
        self.admissions.len() + self.scans.len()
    }

    fn act(&mut self, state: &MultiTaskState) -> Result<MultiTaskAction> {
        let a = self.sac.act(state.as_slice(), false)?;
        Ok(MultiTaskAction {
            evict_score: a[0],
            ttl_estimate: a[1],
        })
    }

    /// Returns the TTL to store the object with, or `None` to skip caching.
    pub fn admit(&mut self, view: &EntryView<'_>, utilization: f64, now: f64) -> Result<Option<f64>> {
        if let Some(old) = self.admissions.complete(view.key, TerminationReason::Expired, now) {
            self.learn(old)?;
        }
        let view = EntryView {
            ttl: self.max_ttl,
            ..*view
        };
        let state = self.encoder.multitask(&view, utilization);
        let action = self.act(&state)?;
        let cached = action.caches(self.threshold);
        let watch = if cached { action.ttl_estimate } else { self.max_ttl };
        let decision = MultiTaskDecision {
            context: MultiTaskContext::Admit { cached },
            action,
        };
        self.admissions
            .track(IncompleteExperience::new(view.key, state.to_vec(), decision, now, watch))?;
        self.stats.decisions += 1;
        self.sac.train()?;
        Ok(cached.then_some(action.ttl_estimate))
    }

    /// Keys to evict, in key order; falls back to LRU when nothing scores high enough.
    pub fn scan(&mut self, cache: &Cache, utilization: f64, now: f64) -> Result<Vec<String>> {
        if cache.is_empty() {
            return Err(Error::Precondition("eviction scan on an empty cache".into()));
        }
        let mut entries: Vec<&CacheEntry> = cache.entries().collect();
        entries.sort_unstable_by(|a, b| a.key.cmp(&b.key));
        let mut victims = Vec::new();
        for entry in entries {
            if let Some(prev) = self.scans.complete(&entry.key, TerminationReason::Expired, now) {
                self.learn(prev)?;
            }
            let view = EntryView {
                key: &entry.key,
                op: OperationType::Read,
                values: &entry.values,
                ttl: entry.remaining(now),
                retrieval_time: entry.retrieval_time,
                hit_count: entry.hit_count,
            };
            let state = self.encoder.multitask(&view, utilization);
            let action = self.act(&state)?;
            let evicted = action.evicts();
            let decision = MultiTaskDecision {
                context: MultiTaskContext::Scan { evicted },
                action,
            };
            self.scans.track(IncompleteExperience::new(
                entry.key.clone(),
                state.to_vec(),
                decision,
                now,
                entry.remaining(now),
            ))?;
            self.stats.decisions += 1;
            if evicted {
                victims.push(entry.key.clone());
            }
        }
        if victims.is_empty() {
            let victim = self.fallback.select_victim()?.to_owned();
            if let Some(kept) = self.scans.complete(&victim, TerminationReason::Evicted, now) {
                self.learn(kept)?;
            }
            victims.push(victim);
        }
        Ok(victims)
    }

    pub fn on_observation(&mut self, obs: &Observation) -> Result<()> {
        self.fallback.observe(obs);
        if let Resolution::Completed(exp) = self.admissions.resolve(&obs.key, obs.kind, obs.at) {
            self.learn(exp)?;
        }
        if obs.kind != ObservationKind::EvictionDecision {
            if let Resolution::Completed(exp) = self.scans.resolve(&obs.key, obs.kind, obs.at) {
                self.learn(exp)?;
            }
        }
        Ok(())
    }

    pub fn sweep(&mut self, now: f64) -> Result<()> {
        for exp in self.admissions.sweep(now) {
            self.learn(exp)?;
        }
        for exp in self.scans.sweep(now) {
            self.learn(exp)?;
        }
        Ok(())
    }

    fn learn(&mut self, exp: IncompleteExperience<MultiTaskDecision>) -> Result<()> {
        let reward = multitask_return(&exp)?;
        let state = MultiTaskState::from_slice(exp.state())?;
        let next = state.with_outcome(exp.termination(), self.encoder.scale_hits(exp.hit_count()));
        let a = exp.action.action;
        self.sac.remember(Transition {
            state: state.to_vec(),
            action: vec![a.evict_score, a.ttl_estimate],
            reward,
            next_state: next.to_vec(),
            continuing: false,
        })?;
        self.stats.rewarded(reward);
        Ok(())
    }
}
