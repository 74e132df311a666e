//! Reward functions. Each is a pure function of a terminal experience.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experience::{IncompleteExperience, TerminationReason};

fn ensure_terminal<A>(exp: &IncompleteExperience<A>) -> Result<()> {
    if exp.is_terminal() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("experience for {:?} is still active", exp.key())))
    }
}

/// What the admission agent decided, plus the request facts its optional
/// reward multipliers need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissionDecision {
    pub cache: bool,
    pub retrieval_time: f64,
    /// Result-set size divided by the size scale.
    pub scaled_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissionRewardConfig {
    /// Multiply hit rewards by retrieval time over `mean_retrieval`.
    pub scale_by_retrieval: bool,
    /// Multiply hit rewards by hits over the scaled result size.
    pub scale_by_size: bool,
    pub mean_retrieval: f64,
}

impl Default for AdmissionRewardConfig {
    fn default() -> Self {
        Self {
            scale_by_retrieval: false,
            scale_by_size: false,
            mean_retrieval: 0.01,
        }
    }
}

pub fn admission_reward(
    exp: &IncompleteExperience<AdmissionDecision>,
    config: &AdmissionRewardConfig,
) -> Result<f64> {
    ensure_terminal(exp)?;
    let d = exp.action;
    let hits = exp.hit_count() as f64;
    if !d.cache {
        return Ok(match exp.termination() {
            TerminationReason::Miss => -1.0,
            _ => 1.0,
        });
    }
    if hits == 0.0 {
        return Ok(-1.0);
    }
    let mut r = hits;
    if config.scale_by_retrieval && config.mean_retrieval > 0.0 {
        r *= d.retrieval_time / config.mean_retrieval;
    }
    if config.scale_by_size && d.scaled_size > 0.0 {
        r *= hits / d.scaled_size;
    }
    Ok(r)
}

pub fn eviction_reward(exp: &IncompleteExperience<bool>) -> Result<f64> {
    ensure_terminal(exp)?;
    let evicted = exp.action;
    Ok(match (evicted, exp.termination()) {
        (true, TerminationReason::Miss) => -1.0,
        (true, _) => 1.0,
        (false, _) if exp.hit_count() > 0 => 1.0,
        (false, _) => -1.0,
    })
}

/// The TTL an entry was given and the cache utility when it was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtlDecision {
    pub ttl: f64,
    pub utilization: f64,
}

/// Invalidated entries pay 1 plus the normalised gap between the estimate
/// and the observed lifetime; anything else earns its hits, scaled up when
/// the cache had room to spare.
pub fn ttl_reward(exp: &IncompleteExperience<TtlDecision>, max_ttl: f64) -> Result<f64> {
    ensure_terminal(exp)?;
    let d = exp.action;
    if exp.termination() == TerminationReason::Invalidated {
        let lifetime = exp.completed_at().expect("terminal") - exp.created_at();
        return Ok(-(1.0 + (d.ttl - lifetime).abs() / max_ttl));
    }
    Ok(exp.hit_count() as f64 * (1.0 + (1.0 - d.utilization)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MultiTaskEvent {
    Hit,
    CorrectEviction,
    CorrectNotCache,
    Miss,
    Invalidation,
}

impl FromStr for MultiTaskEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hit" => Ok(Self::Hit),
            "correct_eviction" => Ok(Self::CorrectEviction),
            "correct_not_cache" => Ok(Self::CorrectNotCache),
            "miss" => Ok(Self::Miss),
            "invalidation" => Ok(Self::Invalidation),
            other => Err(Error::InvalidArgument(format!("unknown multi-task event {other:?}"))),
        }
    }
}

pub fn multitask_reward(event: MultiTaskEvent) -> f64 {
    match event {
        MultiTaskEvent::Hit => 1.0,
        MultiTaskEvent::CorrectEviction | MultiTaskEvent::CorrectNotCache => 10.0,
        MultiTaskEvent::Miss | MultiTaskEvent::Invalidation => -10.0,
    }
}

/// Which head of the multi-task agent a decision came from.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiTaskContext {
    /// Admission: whether the object was cached.
    Admit { cached: bool },
    /// Eviction scan: whether the entry was evicted.
    Scan { evicted: bool },
}

/// The two-valued multi-task output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiTaskAction {
    /// In [0, 1].
    pub evict_score: f64,
    /// In [0, max_ttl].
    pub ttl_estimate: f64,
}

impl MultiTaskAction {
    /// The score rounded to the nearest integer.
    pub fn evicts(&self) -> bool {
        self.evict_score.round() >= 1.0
    }

    /// Strictly above the threshold.
    pub fn caches(&self, threshold: f64) -> bool {
        self.ttl_estimate > threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskDecision {
    pub context: MultiTaskContext,
    pub action: MultiTaskAction,
}

/// Events a terminal multi-task experience produced, in order.
pub fn multitask_events(exp: &IncompleteExperience<MultiTaskDecision>) -> Result<Vec<MultiTaskEvent>> {
    ensure_terminal(exp)?;
    let mut events = vec![MultiTaskEvent::Hit; exp.hit_count() as usize];
    let term = exp.termination();
    let tail = match (&exp.action.context, term) {
        (_, TerminationReason::Miss) => Some(MultiTaskEvent::Miss),
        (MultiTaskContext::Admit { cached: false }, _) => Some(MultiTaskEvent::CorrectNotCache),
        (MultiTaskContext::Scan { evicted: true }, _) => Some(MultiTaskEvent::CorrectEviction),
        (_, TerminationReason::Invalidated) => Some(MultiTaskEvent::Invalidation),
        _ => None,
    };
    events.extend(tail);
    Ok(events)
}

pub fn multitask_return(exp: &IncompleteExperience<MultiTaskDecision>) -> Result<f64> {
    Ok(multitask_events(exp)?.into_iter().map(multitask_reward).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experience::ExperienceStore;
    use crate::observer::ObservationKind;

    /// Runs an experience through a store to a terminal state.
    fn finish<A: Clone>(action: A, hits: u64, end: ObservationKind, at: f64) -> IncompleteExperience<A> {
        let mut s = ExperienceStore::new();
        s.track(IncompleteExperience::new("k", vec![], action, 0.0, 1000.0).with_hits(hits))
            .unwrap();
        match s.resolve("k", end, at) {
            crate::experience::Resolution::Completed(e) => e,
            _ => unreachable!(),
        }
    }

    fn cache(c: bool) -> AdmissionDecision {
        AdmissionDecision {
            cache: c,
            retrieval_time: 0.02,
            scaled_size: 0.5,
        }
    }

    #[test]
    fn admission_cases() {
        let cfg = AdmissionRewardConfig::default();
        let r = |a, h, k| admission_reward(&finish(cache(a), h, k, 5.0), &cfg).unwrap();
        assert_eq!(r(true, 3, ObservationKind::Invalidate), 3.0);
        assert_eq!(r(true, 0, ObservationKind::Expire), -1.0);
        assert_eq!(r(false, 0, ObservationKind::Miss), -1.0);
        assert_eq!(r(false, 0, ObservationKind::Expire), 1.0);
        assert_eq!(r(false, 0, ObservationKind::Invalidate), 1.0);
    }

    #[test]
    fn admission_multipliers() {
        let cfg = AdmissionRewardConfig {
            scale_by_retrieval: true,
            scale_by_size: true,
            mean_retrieval: 0.01,
        };
        let e = finish(cache(true), 2, ObservationKind::Expire, 5.0);
        assert_eq!(admission_reward(&e, &cfg).unwrap(), 2.0 * 2.0 * 4.0);
        let e = finish(cache(true), 0, ObservationKind::Expire, 5.0);
        assert_eq!(admission_reward(&e, &cfg).unwrap(), -1.0);
    }

    #[test]
    fn active_experience_is_rejected() {
        let e = IncompleteExperience::new("k", vec![], cache(true), 0.0, 1.0);
        assert!(matches!(
            admission_reward(&e, &AdmissionRewardConfig::default()),
            Err(Error::Precondition(_))
        ));
        let e = IncompleteExperience::new("k", vec![], true, 0.0, 1.0);
        assert!(eviction_reward(&e).is_err());
    }

    #[test]
    fn eviction_cases() {
        let r = |a, h, k| eviction_reward(&finish(a, h, k, 5.0)).unwrap();
        assert_eq!(r(true, 0, ObservationKind::Miss), -1.0);
        assert_eq!(r(true, 0, ObservationKind::Invalidate), 1.0);
        assert_eq!(r(true, 0, ObservationKind::Expire), 1.0);
        assert_eq!(r(false, 1, ObservationKind::Expire), 1.0);
        assert_eq!(r(false, 0, ObservationKind::Invalidate), -1.0);
    }

    #[test]
    fn ttl_cases() {
        let d = |ttl, u| TtlDecision { ttl, utilization: u };
        let e = finish(d(30.0, 0.5), 4, ObservationKind::Expire, 30.0);
        assert_eq!(ttl_reward(&e, 100.0).unwrap(), 6.0);
        let e = finish(d(50.0, 0.9), 2, ObservationKind::Invalidate, 10.0);
        assert!((ttl_reward(&e, 100.0).unwrap() + 1.4).abs() < 1e-12);
        let e = finish(d(50.0, 0.1), 0, ObservationKind::Expire, 50.0);
        assert_eq!(ttl_reward(&e, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn multitask_values() {
        assert_eq!(multitask_reward(MultiTaskEvent::Hit), 1.0);
        assert_eq!(multitask_reward(MultiTaskEvent::Miss), -10.0);
        assert_eq!(multitask_reward(MultiTaskEvent::Invalidation), -10.0);
        assert_eq!(multitask_reward(MultiTaskEvent::CorrectEviction), 10.0);
        assert_eq!(multitask_reward(MultiTaskEvent::CorrectNotCache), 10.0);
        assert_eq!("correct_not_cache".parse::<MultiTaskEvent>().unwrap(), MultiTaskEvent::CorrectNotCache);
        assert!("bogus".parse::<MultiTaskEvent>().is_err());
    }

    #[test]
    fn multitask_action_rules() {
        let a = |s, t| MultiTaskAction {
            evict_score: s,
            ttl_estimate: t,
        };
        assert!(!a(0.49, 0.0).evicts());
        assert!(a(0.51, 0.0).evicts());
        assert!(a(0.0, 7.0).caches(5.0));
        assert!(!a(0.0, 5.0).caches(5.0));
    }

    #[test]
    fn multitask_returns() {
        let action = MultiTaskAction {
            evict_score: 0.0,
            ttl_estimate: 0.0,
        };
        let admit = |c| MultiTaskDecision {
            context: MultiTaskContext::Admit { cached: c },
            action,
        };
        let scan = |e| MultiTaskDecision {
            context: MultiTaskContext::Scan { evicted: e },
            action,
        };
        let r = |a, h, k| multitask_return(&finish(a, h, k, 5.0)).unwrap();
        assert_eq!(r(admit(true), 3, ObservationKind::Expire), 3.0);
        assert_eq!(r(admit(true), 2, ObservationKind::Invalidate), -8.0);
        assert_eq!(r(admit(false), 0, ObservationKind::Expire), 10.0);
        assert_eq!(r(admit(false), 0, ObservationKind::Miss), -10.0);
        assert_eq!(r(scan(true), 0, ObservationKind::Invalidate), 10.0);
        assert_eq!(r(scan(true), 0, ObservationKind::Miss), -10.0);
        assert_eq!(r(scan(false), 1, ObservationKind::Expire), 1.0);
    }
}
