//! Observation bus: cache events fanned out to every interested subscriber.
//!
//! Emitting only appends to subscriber inboxes, so the request path never
//! waits on a subscriber. Owners drain their inbox when they are ready,
//! which in the single-threaded manager is right after each cache call.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Hit,
    Miss,
    Invalidate,
    Expire,
    EvictionDecision,
    WriteSet,
}

impl ObservationKind {
    pub const ALL: [ObservationKind; 6] = [
        ObservationKind::Hit,
        ObservationKind::Miss,
        ObservationKind::Invalidate,
        ObservationKind::Expire,
        ObservationKind::EvictionDecision,
        ObservationKind::WriteSet,
    ];

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

/// Set of observation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KindSet(u8);

impl KindSet {
    pub fn all() -> Self {
        ObservationKind::ALL.into_iter().collect()
    }

    pub fn contains(self, kind: ObservationKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl FromIterator<ObservationKind> for KindSet {
    fn from_iter<I: IntoIterator<Item = ObservationKind>>(iter: I) -> Self {
        KindSet(iter.into_iter().fold(0, |acc, k| acc | k.bit()))
    }
}

/// Entry metadata carried with an observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub size: usize,
    pub ttl: f64,
    pub stored_at: f64,
    pub hit_count: u64,
    pub retrieval_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ObservationKind,
    pub key: String,
    pub at: f64,
    /// Present when the event concerned a resident entry.
    pub entry: Option<EntryMeta>,
}

impl Observation {
    pub fn new(kind: ObservationKind, key: impl Into<String>, at: f64) -> Self {
        Self {
            kind,
            key: key.into(),
            at,
            entry: None,
        }
    }

    pub fn with_entry(mut self, meta: EntryMeta) -> Self {
        self.entry = Some(meta);
        self
    }
}

/// Anything cache operations can report events to.
pub trait ObservationSink {
    /// Returns how many recipients the observation reached.
    fn emit(&mut self, obs: Observation) -> usize;
}

impl ObservationSink for Vec<Observation> {
    fn emit(&mut self, obs: Observation) -> usize {
        self.push(obs);
        1
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl ObservationSink for NullSink {
    fn emit(&mut self, _obs: Observation) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubscriberId(u32);

#[derive(Debug, Clone)]
struct Subscription {
    id: SubscriberId,
    interests: KindSet,
    inbox: VecDeque<Observation>,
}

#[derive(Debug, Clone, Default)]
pub struct ObservationBus {
    subs: Vec<Subscription>,
    next_id: u32,
}

impl ObservationBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, interests: KindSet) -> Result<SubscriberId> {
        if interests.is_empty() {
            return Err(Error::InvalidArgument("empty interest set".into()));
        }
        let id = SubscriberId(self.next_id);
        self.next_id += 1;
        self.subs.push(Subscription {
            id,
            interests,
            inbox: VecDeque::new(),
        });
        Ok(id)
    }

    /// Stops delivery; undelivered observations are dropped.
    pub fn unsubscribe(&mut self, id: SubscriberId) -> bool {
        let before = self.subs.len();
        self.subs.retain(|s| s.id != id);
        self.subs.len() != before
    }

    pub fn subscribers(&self) -> usize {
        self.subs.len()
    }

    pub fn pending(&self, id: SubscriberId) -> usize {
        self.subs.iter().find(|s| s.id == id).map_or(0, |s| s.inbox.len())
    }

    /// Takes every queued observation for `id`, oldest first.
    pub fn drain(&mut self, id: SubscriberId) -> Vec<Observation> {
        match self.subs.iter_mut().find(|s| s.id == id) {
            Some(s) => s.inbox.drain(..).collect(),
            None => Vec::new(),
        }
    }

    /// Feeds queued observations for `id` to `handler`; returns how many ran.
    pub fn dispatch<F: FnMut(Observation)>(&mut self, id: SubscriberId, mut handler: F) -> usize {
        let batch = self.drain(id);
        let n = batch.len();
        batch.into_iter().for_each(&mut handler);
        n
    }
}

impl ObservationSink for ObservationBus {
    fn emit(&mut self, obs: Observation) -> usize {
        let mut delivered = 0;
        for s in self.subs.iter_mut().filter(|s| s.interests.contains(obs.kind)) {
            s.inbox.push_back(obs.clone());
            delivered += 1;
        }
        delivered
    }
}
