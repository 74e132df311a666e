//! Capacity-bounded key-value cache with per-entry TTL.
//!
//! Entries live in a hash map; their expiry deadlines sit in an indexed
//! min-heap so sweeps only touch what is due. Deadlines are exclusive: an
//! entry stored at `t` with TTL `d` is dead from `t + d` on, and a dead
//! entry is never served even before the sweep removes it.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::deadline::DeadlineQueue;
use crate::error::{Error, Result};
use crate::observer::{EntryMeta, Observation, ObservationKind, ObservationSink};

/// Field-name / field-value pairs returned for a key.
pub type ResultSet = Vec<(String, String)>;

/// Bytes of a result set: the summed value lengths.
pub fn result_size(values: &[(String, String)]) -> usize {
    values.iter().map(|(_, v)| v.len()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub values: ResultSet,
    pub size: usize,
    pub ttl: f64,
    pub stored_at: f64,
    pub hit_count: u64,
    pub retrieval_time: f64,
}

impl CacheEntry {
    pub fn deadline(&self) -> f64 {
        self.stored_at + self.ttl
    }

    pub fn is_live(&self, now: f64) -> bool {
        now < self.deadline()
    }

    /// Seconds left before expiry, never negative.
    pub fn remaining(&self, now: f64) -> f64 {
        (self.deadline() - now).max(0.0)
    }

    pub fn meta(&self) -> EntryMeta {
        EntryMeta {
            size: self.size,
            ttl: self.ttl,
            stored_at: self.stored_at,
            hit_count: self.hit_count,
            retrieval_time: self.retrieval_time,
        }
    }

    fn observation(&self, kind: ObservationKind, at: f64) -> Observation {
        Observation::new(kind, self.key.clone(), at).with_entry(self.meta())
    }
}

#[derive(Debug, PartialEq)]
pub enum GetOutcome<'a> {
    Hit(&'a CacheEntry),
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Stored,
    RejectedFull,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvalidateOutcome {
    Removed(CacheEntry),
    Absent,
}

#[derive(Debug, Clone)]
pub struct Cache {
    capacity: usize,
    entries: FxHashMap<String, CacheEntry>,
    deadlines: DeadlineQueue<String>,
}

impl Cache {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("cache capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: FxHashMap::default(),
            deadlines: DeadlineQueue::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Resident entries, including dead ones not yet swept.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn utilization(&self) -> f64 {
        self.entries.len() as f64 / self.capacity as f64
    }

    /// Whether `put(key, ..)` would be stored right now.
    pub fn has_room_for(&self, key: &str) -> bool {
        self.entries.len() < self.capacity || self.entries.contains_key(key)
    }

    /// Looks at an entry without counting a hit or emitting anything.
    pub fn peek(&self, key: &str) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.values()
    }

    pub fn get<S: ObservationSink + ?Sized>(&mut self, key: &str, now: f64, sink: &mut S) -> GetOutcome<'_> {
        let live = match self.entries.get(key) {
            None => None,
            Some(e) => Some(e.is_live(now)),
        };
        match live {
            Some(true) => {
                let e = self.entries.get_mut(key).expect("present");
                e.hit_count += 1;
                sink.emit(e.observation(ObservationKind::Hit, now));
                GetOutcome::Hit(e)
            }
            Some(false) => {
                let dead = self.remove(key).expect("present");
                sink.emit(dead.observation(ObservationKind::Expire, now));
                sink.emit(Observation::new(ObservationKind::Miss, key, now));
                GetOutcome::Miss
            }
            None => {
                sink.emit(Observation::new(ObservationKind::Miss, key, now));
                GetOutcome::Miss
            }
        }
    }

    /// Stores an entry. Replacing a key keeps the resident count unchanged;
    /// a new key on a full cache is refused so the caller can evict first.
    pub fn put<S: ObservationSink + ?Sized>(
        &mut self,
        key: &str,
        values: ResultSet,
        ttl: f64,
        retrieval_time: f64,
        now: f64,
        sink: &mut S,
    ) -> Result<PutOutcome> {
        if !(ttl >= 0.0) || !ttl.is_finite() {
            return Err(Error::InvalidArgument(format!("ttl must be a finite non-negative number, got {ttl}")));
        }
        if !(retrieval_time >= 0.0) {
            return Err(Error::InvalidArgument(format!("retrieval time must be non-negative, got {retrieval_time}")));
        }
        if !self.has_room_for(key) {
            return Ok(PutOutcome::RejectedFull);
        }
        if let Some(old) = self.remove(key) {
            if !old.is_live(now) {
                sink.emit(old.observation(ObservationKind::Expire, now));
            }
        }
        let entry = CacheEntry {
            key: key.to_owned(),
            size: result_size(&values),
            values,
            ttl,
            stored_at: now,
            hit_count: 0,
            retrieval_time,
        };
        self.deadlines.insert(entry.key.clone(), entry.deadline());
        sink.emit(entry.observation(ObservationKind::WriteSet, now));
        self.entries.insert(entry.key.clone(), entry);
        Ok(PutOutcome::Stored)
    }

    /// Removes `key` if present. The observation is emitted either way so that
    /// decisions about non-resident keys still see the invalidation.
    pub fn invalidate<S: ObservationSink + ?Sized>(&mut self, key: &str, now: f64, sink: &mut S) -> InvalidateOutcome {
        match self.remove(key) {
            Some(e) => {
                sink.emit(e.observation(ObservationKind::Invalidate, now));
                InvalidateOutcome::Removed(e)
            }
            None => {
                sink.emit(Observation::new(ObservationKind::Invalidate, key, now));
                InvalidateOutcome::Absent
            }
        }
    }

    /// Removes `key` on behalf of an eviction strategy.
    pub fn evict<S: ObservationSink + ?Sized>(&mut self, key: &str, now: f64, sink: &mut S) -> Option<CacheEntry> {
        let e = self.remove(key)?;
        sink.emit(e.observation(ObservationKind::EvictionDecision, now));
        Some(e)
    }

    /// Removes and returns every entry whose deadline is `<= now`, earliest first.
    pub fn sweep_expired<S: ObservationSink + ?Sized>(&mut self, now: f64, sink: &mut S) -> Vec<CacheEntry> {
        let mut out = Vec::new();
        while let Some((key, _)) = self.deadlines.pop_due(now) {
            let e = self.entries.remove(&key).expect("heap and map agree");
            sink.emit(e.observation(ObservationKind::Expire, now));
            out.push(e);
        }
        out
    }

    fn remove(&mut self, key: &str) -> Option<CacheEntry> {
        let e = self.entries.remove(key)?;
        self.deadlines.remove(key);
        Some(e)
    }

    /// Every resident key has exactly one heap node carrying its deadline.
    pub fn is_consistent(&self) -> bool {
        self.deadlines.len() == self.entries.len()
            && self
                .entries
                .values()
                .all(|e| self.deadlines.deadline(e.key.as_str()) == Some(e.deadline()))
            && self.entries.len() <= self.capacity
    }
}
