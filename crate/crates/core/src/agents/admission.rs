use rlcache_rl::{DqnAgent, Transition};

use super::encode::{AdmissionState, EntryView, StateEncoder, ADMISSION_INDEX_INPUTS};
use super::reward::{admission_reward, AdmissionDecision, AdmissionRewardConfig};
use super::{AgentStats, AgentsConfig};
use crate::experience::{ExperienceStore, IncompleteExperience, Resolution, TerminationReason};
use crate::observer::Observation;
use crate::Result;

/// DQN deciding whether to cache an object on a write or a read-miss fetch.
///
/// A cached object is watched for its TTL, a refused one for `max_ttl`, so a
/// refusal is judged by whether the object got requested in the meantime.
#[derive(Debug, Clone)]
pub struct AdmissionAgent {
    dqn: DqnAgent,
    encoder: StateEncoder,
    store: ExperienceStore<AdmissionDecision>,
    reward: AdmissionRewardConfig,
    max_ttl: f64,
    stats: AgentStats,
}

impl AdmissionAgent {
    pub fn new(config: &AgentsConfig, max_ttl: f64, seed: u64) -> Result<Self> {
        let encoder = config.encoder(max_ttl)?;
        let emb = encoder.embedding(config.embedding_dim, &ADMISSION_INDEX_INPUTS);
        let dqn = DqnAgent::new(config.dqn.clone(), AdmissionState::LEN, Some(emb), 2, seed)?;
        Ok(Self {
            dqn,
            encoder,
            store: ExperienceStore::new(),
            reward: config.admission_reward,
            max_ttl,
            stats: AgentStats::default(),
        })
    }

    pub fn dqn(&self) -> &DqnAgent {
        &self.dqn
    }

    pub fn dqn_mut(&mut self) -> &mut DqnAgent {
        &mut self.dqn
    }

    pub fn encoder_mut(&mut self) -> &mut StateEncoder {
        &mut self.encoder
    }

    pub fn stats(&self) -> AgentStats {
        AgentStats {
            train_steps: self.dqn.train_steps(),
            ..self.stats
        }
    }

    pub fn pending(&self) -> usize {
        self.store.len()
    }

    /// Decides and starts watching the outcome; `view.ttl` is the TTL the
    /// object would get.
    pub fn decide(&mut self, view: &EntryView<'_>, now: f64) -> Result<bool> {
        if let Some(old) = self.store.complete(view.key, TerminationReason::Expired, now) {
            self.learn(old)?;
        }
        let state = self.encoder.admission(view);
        let cache = self.dqn.act(state.as_slice())? == 1;
        let decision = AdmissionDecision {
            cache,
            retrieval_time: view.retrieval_time,
            scaled_size: state.0[3],
        };
        let watch = if cache { view.ttl } else { self.max_ttl };
        self.store
            .track(IncompleteExperience::new(view.key, state.to_vec(), decision, now, watch))?;
        self.stats.decisions += 1;
        Ok(cache)
    }

    pub fn on_observation(&mut self, obs: &Observation) -> Result<()> {
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

    fn learn(&mut self, exp: IncompleteExperience<AdmissionDecision>) -> Result<()> {
        let reward = admission_reward(&exp, &self.reward)?;
        let state = AdmissionState::from_slice(exp.state())?;
        let next = state.with_outcome(exp.termination(), self.encoder.scale_hits(exp.hit_count()));
        self.dqn.observe(Transition {
            state: state.to_vec(),
            action: exp.action.cache as usize,
            reward,
            next_state: next.to_vec(),
            continuing: false,
        })?;
        self.stats.rewarded(reward);
        Ok(())
    }
}
