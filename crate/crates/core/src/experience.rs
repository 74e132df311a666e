//! Store of incomplete experiences: decisions whose reward is not known yet.
//!
//! Each tracked experience waits for an outcome on its key or for its watch
//! window to run out. The store hands terminal experiences back to the
//! caller instead of invoking callbacks, so the owning agent turns them into
//! rewards on its own schedule.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::deadline::DeadlineQueue;
use crate::error::{Error, Result};
use crate::observer::ObservationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TerminationReason {
    Active = 0,
    Invalidated = 1,
    Evicted = 2,
    Expired = 3,
    Miss = 4,
}

impl TerminationReason {
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Terminal reason an observation implies, if any.
    pub fn from_kind(kind: ObservationKind) -> Option<Self> {
        match kind {
            ObservationKind::Invalidate => Some(Self::Invalidated),
            ObservationKind::Expire => Some(Self::Expired),
            ObservationKind::EvictionDecision => Some(Self::Evicted),
            ObservationKind::Miss => Some(Self::Miss),
            ObservationKind::Hit | ObservationKind::WriteSet => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteExperience<A> {
    key: String,
    frozen_state: Box<[f64]>,
    pub action: A,
    created_at: f64,
    watch_ttl: f64,
    hit_count: u64,
    termination: TerminationReason,
    completed_at: Option<f64>,
}

impl<A> IncompleteExperience<A> {
    pub fn new(key: impl Into<String>, state: Vec<f64>, action: A, created_at: f64, watch_ttl: f64) -> Self {
        Self {
            key: key.into(),
            frozen_state: state.into_boxed_slice(),
            action,
            created_at,
            watch_ttl: watch_ttl.max(0.0),
            hit_count: 0,
            termination: TerminationReason::Active,
            completed_at: None,
        }
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    /// State as it was when the decision was made.
    pub fn state(&self) -> &[f64] {
        &self.frozen_state
    }

    pub fn created_at(&self) -> f64 {
        self.created_at
    }

    pub fn watch_ttl(&self) -> f64 {
        self.watch_ttl
    }

    pub fn deadline(&self) -> f64 {
        self.created_at + self.watch_ttl
    }

    pub fn hit_count(&self) -> u64 {
        self.hit_count
    }

    pub fn termination(&self) -> TerminationReason {
        self.termination
    }

    pub fn completed_at(&self) -> Option<f64> {
        self.completed_at
    }

    pub fn is_terminal(&self) -> bool {
        self.termination != TerminationReason::Active
    }

    /// Seeds the hit counter, for experiences carried over from another store.
    pub fn with_hits(mut self, hits: u64) -> Self {
        self.hit_count = hits;
        self
    }

    fn finish(&mut self, reason: TerminationReason, at: f64) {
        self.termination = reason;
        self.completed_at = Some(at);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution<A> {
    Updated { hit_count: u64 },
    Completed(IncompleteExperience<A>),
    Untracked,
}

#[derive(Debug, Clone)]
pub struct ExperienceStore<A> {
    active: FxHashMap<String, IncompleteExperience<A>>,
    deadlines: DeadlineQueue<String>,
}

impl<A> Default for ExperienceStore<A> {
    fn default() -> Self {
        Self {
            active: FxHashMap::default(),
            deadlines: DeadlineQueue::new(),
        }
    }
}

impl<A> ExperienceStore<A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.active.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&IncompleteExperience<A>> {
        self.active.get(key)
    }

    pub fn track(&mut self, experience: IncompleteExperience<A>) -> Result<()> {
        if experience.is_terminal() {
            return Err(Error::Precondition("cannot track a terminal experience".into()));
        }
        if self.active.contains_key(&experience.key) {
            return Err(Error::Precondition(format!(
                "key {:?} already has an active experience",
                experience.key
            )));
        }
        self.deadlines.insert(experience.key.clone(), experience.deadline());
        self.active.insert(experience.key.clone(), experience);
        Ok(())
    }

    /// Applies an observation to the experience tracked under `key`.
    pub fn resolve(&mut self, key: &str, kind: ObservationKind, now: f64) -> Resolution<A> {
        let Some(exp) = self.active.get_mut(key) else {
            return Resolution::Untracked;
        };
        match TerminationReason::from_kind(kind) {
            None => {
                if kind == ObservationKind::Hit {
                    exp.hit_count += 1;
                }
                Resolution::Updated {
                    hit_count: exp.hit_count,
                }
            }
            Some(reason) => match self.complete(key, reason, now) {
                Some(exp) => Resolution::Completed(exp),
                None => Resolution::Untracked,
            },
        }
    }

    /// Terminates the experience under `key` with `reason` regardless of events.
    pub fn complete(&mut self, key: &str, reason: TerminationReason, now: f64) -> Option<IncompleteExperience<A>> {
        debug_assert!(reason != TerminationReason::Active);
        let mut exp = self.active.remove(key)?;
        self.deadlines.remove(key);
        exp.finish(reason, now);
        Some(exp)
    }

    /// Expires every experience whose watch deadline is `<= now`, earliest first.
    pub fn sweep(&mut self, now: f64) -> Vec<IncompleteExperience<A>> {
        let mut out = Vec::new();
        while let Some((key, _)) = self.deadlines.pop_due(now) {
            let mut exp = self.active.remove(&key).expect("queue and map agree");
            exp.finish(TerminationReason::Expired, now);
            out.push(exp);
        }
        out
    }
}
