//! Turns cache requests and entries into the fixed-length state vectors the
//! agents consume. Keys and result-set tokens index one shared embedding
//! table: keys take rows `0..=cap`, value tokens rows `cap+1..=2cap+1`.

use rlcache_rl::{EmbeddingSpec, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::baselines::OperationType;
use crate::cache::result_size;
use crate::error::{Error, Result};
use crate::experience::TerminationReason;

/// Divisors that bring raw features to roughly [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureScales {
    /// Bytes.
    pub max_size: f64,
    /// Seconds.
    pub max_ttl: f64,
    /// Seconds.
    pub max_retrieval: f64,
    pub max_hits: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        Self {
            max_size: 1000.0,
            max_ttl: 120.0,
            max_retrieval: 0.1,
            max_hits: 100.0,
        }
    }
}

/// What an agent gets to see about one request or resident entry.
#[derive(Debug, Clone, Copy)]
pub struct EntryView<'a> {
    pub key: &'a str,
    pub op: OperationType,
    pub values: &'a [(String, String)],
    pub ttl: f64,
    pub retrieval_time: f64,
    pub hit_count: u64,
}

macro_rules! state_type {
    ($name:ident, $len:expr, $term:expr, $hits:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub [f64; $len]);

        impl $name {
            pub const LEN: usize = $len;
            const TERM: usize = $term;
            const HITS: usize = $hits;

            pub fn from_slice(values: &[f64]) -> Result<Self> {
                <[f64; $len]>::try_from(values).map(Self).map_err(|_| {
                    Error::InvalidArgument(format!(
                        "{} needs {} components, got {}",
                        stringify!($name),
                        $len,
                        values.len()
                    ))
                })
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn to_vec(&self) -> Vec<f64> {
                self.0.to_vec()
            }

            /// The same state after its outcome is known.
            pub fn with_outcome(mut self, term: TerminationReason, scaled_hits: f64) -> Self {
                self.0[Self::TERM] = term.code() as f64;
                self.0[Self::HITS] = scaled_hits;
                self
            }
        }
    };
}

// [key, op, value, size, ttl, retrieval, term, hits]
state_type!(AdmissionState, 8, 6, 7);
// [key, value, size, hits, term, utility]
state_type!(TtlState, 6, 4, 3);
// admission layout followed by utility
state_type!(MultiTaskState, 9, 6, 7);

impl TtlState {
    pub fn utility(&self) -> f64 {
        self.0[5]
    }
}

impl MultiTaskState {
    pub fn admission_part(&self) -> AdmissionState {
        let mut a = [0.0; 8];
        a.copy_from_slice(&self.0[..8]);
        AdmissionState(a)
    }
}

/// Embedding positions of each state layout.
pub const ADMISSION_INDEX_INPUTS: [usize; 2] = [0, 2];
pub const TTL_INDEX_INPUTS: [usize; 2] = [0, 1];
pub const MULTITASK_INDEX_INPUTS: [usize; 2] = [0, 2];

#[derive(Debug, Clone)]
pub struct StateEncoder {
    keys: Vocabulary,
    values: Vocabulary,
    scales: FeatureScales,
}

impl StateEncoder {
    pub fn new(vocab_cap: usize, scales: FeatureScales) -> Result<Self> {
        if vocab_cap == 0 {
            return Err(Error::InvalidArgument("vocabulary cap must be positive".into()));
        }
        if [scales.max_size, scales.max_ttl, scales.max_retrieval, scales.max_hits]
            .iter()
            .any(|s| !(*s > 0.0))
        {
            return Err(Error::InvalidArgument("feature scales must be positive".into()));
        }
        Ok(Self {
            keys: Vocabulary::new(vocab_cap),
            values: Vocabulary::new(vocab_cap),
            scales,
        })
    }

    pub fn scales(&self) -> &FeatureScales {
        &self.scales
    }

    /// Rows of the shared key/value embedding table.
    pub fn table_size(&self) -> usize {
        self.keys.table_size() + self.values.table_size()
    }

    pub fn embedding(&self, dim: usize, index_inputs: &[usize]) -> EmbeddingSpec {
        EmbeddingSpec {
            vocab: self.table_size(),
            dim,
            index_inputs: index_inputs.to_vec(),
        }
    }

    pub fn key_index(&mut self, key: &str) -> usize {
        self.keys.encode(key)
    }

    /// Token of the first field value; an empty result set shares the
    /// out-of-vocabulary value row.
    pub fn value_index(&mut self, values: &[(String, String)]) -> usize {
        let token = values.first().map_or(rlcache_rl::OOV_INDEX, |(_, v)| self.values.encode(v));
        self.keys.table_size() + token
    }

    pub fn scale_hits(&self, hits: u64) -> f64 {
        (hits as f64 / self.scales.max_hits).min(1.0)
    }

    fn scale_size(&self, values: &[(String, String)]) -> f64 {
        result_size(values) as f64 / self.scales.max_size
    }

    pub fn admission(&mut self, view: &EntryView<'_>) -> AdmissionState {
        AdmissionState([
            self.key_index(view.key) as f64,
            view.op.code() as f64,
            self.value_index(view.values) as f64,
            self.scale_size(view.values),
            view.ttl / self.scales.max_ttl,
            view.retrieval_time / self.scales.max_retrieval,
            TerminationReason::Active.code() as f64,
            self.scale_hits(view.hit_count),
        ])
    }

    pub fn ttl(&mut self, view: &EntryView<'_>, utility: f64) -> TtlState {
        TtlState([
            self.key_index(view.key) as f64,
            self.value_index(view.values) as f64,
            self.scale_size(view.values),
            self.scale_hits(view.hit_count),
            TerminationReason::Active.code() as f64,
            utility,
        ])
    }

    pub fn multitask(&mut self, view: &EntryView<'_>, utility: f64) -> MultiTaskState {
        let a = self.admission(view).0;
        let mut s = [0.0; 9];
        s[..8].copy_from_slice(&a);
        s[8] = utility;
        MultiTaskState(s)
    }
}
