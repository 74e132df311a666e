use rlcache_rl::{SacAgent, Transition};

use super::encode::{EntryView, StateEncoder, TtlState, TTL_INDEX_INPUTS};
use super::reward::{ttl_reward, TtlDecision};
use super::{AgentStats, AgentsConfig};
use crate::error::Error;
use crate::experience::{ExperienceStore, IncompleteExperience, Resolution, TerminationReason};
use crate::observer::{Observation, ObservationKind};
use crate::Result;

#[derive(Debug, Clone)]
struct Pending {
    key: String,
    state: TtlState,
    decision: TtlDecision,
}

/// SAC estimating a TTL in `[0, max_ttl]` for every object the cache stores.
///
/// Estimation and tracking are split: `propose` picks a TTL, `commit` starts
/// watching once the object is actually stored. An entry that another
/// strategy evicts moves to a monitor for `max_ttl` more seconds, where
/// later requests still count toward its reward.
#[derive(Debug, Clone)]
pub struct TtlAgent {
    sac: SacAgent,
    encoder: StateEncoder,
    store: ExperienceStore<TtlDecision>,
    monitor: ExperienceStore<TtlDecision>,
    pending: Option<Pending>,
    max_ttl: f64,
    stats: AgentStats,
}

impl TtlAgent {
    pub fn new(config: &AgentsConfig, max_ttl: f64, seed: u64) -> Result<Self> {
        if !(max_ttl > 0.0) {
            return Err(Error::InvalidArgument("max_ttl must be positive".into()));
        }
        let encoder = config.encoder(max_ttl)?;
        let emb = encoder.embedding(config.embedding_dim, &TTL_INDEX_INPUTS);
        let sac = SacAgent::new(config.sac.clone(), TtlState::LEN, Some(emb), vec![0.0], vec![max_ttl], seed)?;
        Ok(Self {
            sac,
            encoder,
            store: ExperienceStore::new(),
            monitor: ExperienceStore::new(),
            pending: None,
            max_ttl,
            stats: AgentStats::default(),
        })
    }

    pub fn sac(&self) -> &SacAgent {
        &self.sac
    }

    pub fn sac_mut(&mut self) -> &mut SacAgent {
        &mut self.sac
    }

    pub fn encoder_mut(&mut self) -> &mut StateEncoder {
        &mut self.encoder
    }

    pub fn max_ttl(&self) -> f64 {
        self.max_ttl
    }

    pub fn stats(&self) -> AgentStats {
        AgentStats {
            train_steps: self.sac.train_steps(),
            ..self.stats
        }
    }

    /// Experiences still waiting, monitored ones included.
    pub fn pending(&self) -> usize {
        self.store.len() + self.monitor.len()
    }

    /// Policy mean for a state, without exploration noise.
    pub fn estimate(&mut self, view: &EntryView<'_>, utilization: f64) -> Result<f64> {
        let state = self.encoder.ttl(view, utilization);
        Ok(self.sac.act_deterministic(state.as_slice())?[0])
    }

    /// Samples a TTL for `view`; remembered until `commit` or the next proposal.
    pub fn propose(&mut self, view: &EntryView<'_>, utilization: f64) -> Result<f64> {
        let state = self.encoder.ttl(view, utilization);
        let ttl = self.sac.act(state.as_slice(), false)?[0];
        self.pending = Some(Pending {
            key: view.key.to_owned(),
            state,
            decision: TtlDecision { ttl, utilization },
        });
        Ok(ttl)
    }

    /// Drops the last proposal; the object was not stored.
    pub fn discard(&mut self) {
        self.pending = None;
    }

    /// Starts tracking the last proposal, which must be for `key`.
    pub fn commit(&mut self, key: &str, now: f64) -> Result<()> {
        let p = match self.pending.take() {
            Some(p) if p.key == key => p,
            _ => return Err(Error::Precondition(format!("no TTL proposal pending for {key:?}"))),
        };
        if let Some(old) = self.store.complete(key, TerminationReason::Expired, now) {
            self.learn(old)?;
        }
        self.store.track(IncompleteExperience::new(
            p.key,
            p.state.to_vec(),
            p.decision,
            now,
            p.decision.ttl,
        ))?;
        self.stats.decisions += 1;
        Ok(())
    }

    pub fn on_observation(&mut self, obs: &Observation) -> Result<()> {
        // Monitor first, so an entry moved there by this very eviction is not
        // closed by it.
        if self.monitor.contains(&obs.key) {
            let done = match obs.kind {
                ObservationKind::Miss | ObservationKind::Hit => {
                    self.monitor.resolve(&obs.key, ObservationKind::Hit, obs.at);
                    None
                }
                // A newer copy of the object takes over from here.
                ObservationKind::WriteSet => self.monitor.complete(&obs.key, TerminationReason::Expired, obs.at),
                kind => match self.monitor.resolve(&obs.key, kind, obs.at) {
                    Resolution::Completed(e) => Some(e),
                    _ => None,
                },
            };
            if let Some(exp) = done {
                self.learn(exp)?;
            }
        }
        if let Resolution::Completed(exp) = self.store.resolve(&obs.key, obs.kind, obs.at) {
            if exp.termination() == TerminationReason::Evicted {
                let watch = obs.at - exp.created_at() + self.max_ttl;
                let moved = IncompleteExperience::new(exp.key(), exp.state().to_vec(), exp.action, exp.created_at(), watch)
                    .with_hits(exp.hit_count());
                self.monitor.track(moved)?;
            } else {
                self.learn(exp)?;
            }
        }
        Ok(())
    }

    pub fn sweep(&mut self, now: f64) -> Result<()> {
        for exp in self.store.sweep(now) {
            self.learn(exp)?;
        }
        for exp in self.monitor.sweep(now) {
            self.learn(exp)?;
        }
        Ok(())
    }

    fn learn(&mut self, exp: IncompleteExperience<TtlDecision>) -> Result<()> {
        let reward = ttl_reward(&exp, self.max_ttl)?;
        let state = TtlState::from_slice(exp.state())?;
        let next = state.with_outcome(exp.termination(), self.encoder.scale_hits(exp.hit_count()));
        self.sac.observe(Transition {
            state: state.to_vec(),
            action: vec![exp.action.ttl],
            reward,
            next_state: next.to_vec(),
            continuing: false,
        })?;
        self.stats.rewarded(reward);
        Ok(())
    }
}
