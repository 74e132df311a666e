//! Simulated persistent store behind the cache.
//!
//! Every key gets a fixed mean retrieval latency drawn once from a seeded
//! log-normal, so some keys are consistently slower than others, like rows
//! living on a busier shard.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::cache::ResultSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    /// Location of the log-normal, ln seconds.
    pub mu: f64,
    pub sigma: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            mu: 0.01f64.ln(),
            sigma: 0.5,
        }
    }
}

impl LatencyModel {
    /// Latency of `key` under `seed`; a pure function of both.
    pub fn latency(&self, key: &str, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(key.as_bytes()));
        LogNormal::new(self.mu, self.sigma)
            .expect("validated parameters")
            .sample(&mut rng)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `Hash`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendRecord {
    pub key: String,
    pub values: ResultSet,
    pub latency: f64,
}

#[derive(Debug, Clone)]
pub struct Backend {
    records: FxHashMap<String, BackendRecord>,
    model: LatencyModel,
    seed: u64,
}

impl Backend {
    pub fn new(model: LatencyModel, seed: u64) -> Result<Self> {
        if !(model.sigma >= 0.0) || !model.mu.is_finite() {
            return Err(Error::InvalidArgument("latency model needs finite mu and sigma >= 0".into()));
        }
        Ok(Self {
            records: FxHashMap::default(),
            model,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.records.contains_key(key)
    }

    pub fn record(&self, key: &str) -> Option<&BackendRecord> {
        self.records.get(key)
    }

    /// Inserts or replaces the values for `key`. A key keeps its latency for life.
    pub fn write(&mut self, key: &str, values: ResultSet) {
        match self.records.get_mut(key) {
            Some(r) => r.values = values,
            None => {
                let latency = self.model.latency(key, self.seed);
                self.records.insert(
                    key.to_owned(),
                    BackendRecord {
                        key: key.to_owned(),
                        values,
                        latency,
                    },
                );
            }
        }
    }

    /// Values and retrieval latency of `key`.
    pub fn read(&self, key: &str) -> Result<(ResultSet, f64)> {
        self.records
            .get(key)
            .map(|r| (r.values.clone(), r.latency))
            .ok_or_else(|| Error::NotFound(key.to_owned()))
    }

    pub fn latency(&self, key: &str) -> Option<f64> {
        self.records.get(key).map(|r| r.latency)
    }
}
