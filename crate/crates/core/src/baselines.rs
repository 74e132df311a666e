//! Rule-based strategies: LRU/LFU/FIFO eviction, write-through and
//! write-on-read admission, and a fixed TTL.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{Observation, ObservationKind};

/// Request context an admission decision is made in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum OperationType {
    Read = 0,
    Write = 1,
    ReadMissFetch = 2,
}

impl OperationType {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionPolicyKind {
    Lru,
    Lfu,
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionPolicyKind {
    WriteThrough,
    WriteOnRead,
}

impl FromStr for EvictionPolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lru" => Ok(Self::Lru),
            "lfu" => Ok(Self::Lfu),
            "fifo" => Ok(Self::Fifo),
            other => Err(Error::InvalidArgument(format!("unknown eviction policy {other:?}"))),
        }
    }
}

impl fmt::Display for EvictionPolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lru => "lru",
            Self::Lfu => "lfu",
            Self::Fifo => "fifo",
        })
    }
}

impl FromStr for AdmissionPolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "write_through" => Ok(Self::WriteThrough),
            "write_on_read" => Ok(Self::WriteOnRead),
            other => Err(Error::InvalidArgument(format!("unknown admission policy {other:?}"))),
        }
    }
}

/// Write-through caches on writes and on the fetch after a read miss;
/// write-on-read only on the fetch.
pub fn should_cache(policy: AdmissionPolicyKind, op: OperationType) -> bool {
    match (policy, op) {
        (_, OperationType::ReadMissFetch) => true,
        (AdmissionPolicyKind::WriteThrough, OperationType::Write) => true,
        (AdmissionPolicyKind::WriteOnRead, OperationType::Write) => false,
        (_, OperationType::Read) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedTtlConfig {
    pub seconds: f64,
}

impl Default for FixedTtlConfig {
    fn default() -> Self {
        Self { seconds: 60.0 }
    }
}

pub fn fixed_ttl(config: &FixedTtlConfig) -> f64 {
    config.seconds
}

#[derive(Debug, Clone, Copy)]
struct Meta {
    inserted: u64,
    last_access: u64,
    hits: u64,
}

/// Residency bookkeeping for one rule-based eviction policy.
///
/// Every event gets a fresh logical tick, so LRU and FIFO orders are total;
/// LFU ties fall back to the least recent access.
#[derive(Debug, Clone)]
pub struct EvictionBook {
    kind: EvictionPolicyKind,
    tick: u64,
    meta: FxHashMap<String, Meta>,
    order: BTreeSet<(u64, u64, String)>,
}

impl EvictionBook {
    pub fn new(kind: EvictionPolicyKind) -> Self {
        Self {
            kind,
            tick: 0,
            meta: FxHashMap::default(),
            order: BTreeSet::new(),
        }
    }

    pub fn kind(&self) -> EvictionPolicyKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.meta.contains_key(key)
    }

    fn rank(&self, m: &Meta) -> (u64, u64) {
        match self.kind {
            EvictionPolicyKind::Lru => (m.last_access, 0),
            EvictionPolicyKind::Fifo => (m.inserted, 0),
            EvictionPolicyKind::Lfu => (m.hits, m.last_access),
        }
    }

    /// A key became resident; re-insertion resets its history.
    pub fn on_insert(&mut self, key: &str) {
        self.on_remove(key);
        self.tick += 1;
        let m = Meta {
            inserted: self.tick,
            last_access: self.tick,
            hits: 0,
        };
        let (a, b) = self.rank(&m);
        self.order.insert((a, b, key.to_owned()));
        self.meta.insert(key.to_owned(), m);
    }

    pub fn on_access(&mut self, key: &str) {
        let Some(&old) = self.meta.get(key) else {
            return;
        };
        let (a, b) = self.rank(&old);
        let owned = self.order.take(&(a, b, key.to_owned())).expect("order tracks meta").2;
        self.tick += 1;
        let m = Meta {
            last_access: self.tick,
            hits: old.hits + 1,
            ..old
        };
        let (a, b) = self.rank(&m);
        self.order.insert((a, b, owned));
        self.meta.insert(key.to_owned(), m);
    }

    pub fn on_remove(&mut self, key: &str) -> bool {
        match self.meta.remove(key) {
            Some(m) => {
                let (a, b) = self.rank(&m);
                self.order.remove(&(a, b, key.to_owned()));
                true
            }
            None => false,
        }
    }

    /// Keeps the book in step with cache events.
    pub fn observe(&mut self, obs: &Observation) {
        match obs.kind {
            ObservationKind::WriteSet => self.on_insert(&obs.key),
            ObservationKind::Hit => self.on_access(&obs.key),
            ObservationKind::Invalidate | ObservationKind::Expire | ObservationKind::EvictionDecision => {
                self.on_remove(&obs.key);
            }
            ObservationKind::Miss => {}
        }
    }

    pub fn select_victim(&self) -> Result<&str> {
        self.order
            .first()
            .map(|(_, _, k)| k.as_str())
            .ok_or_else(|| Error::Precondition("victim requested from an empty cache".into()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.meta.keys().map(String::as_str)
    }
}
