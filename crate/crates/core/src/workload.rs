//! YCSB-style workload generation: a seeded load phase followed by phases of
//! reads and writes whose keys follow a hotspot, Zipfian, uniform or
//! periodic-invalidation pattern.

use rand::distributions::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::cache::ResultSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KeyDistribution {
    Zipfian {
        theta: f64,
    },
    Hotspot {
        hot_fraction: f64,
        hot_opn_fraction: f64,
    },
    Uniform,
    /// The first `keys` records are each rewritten every `period` seconds on a
    /// staggered schedule; every other operation reads one of them uniformly.
    /// The read/write fractions are ignored.
    PeriodicInvalidation {
        keys: usize,
        period: f64,
    },
}

impl Default for KeyDistribution {
    fn default() -> Self {
        KeyDistribution::Hotspot {
            hot_fraction: 0.2,
            hot_opn_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub name: String,
    pub read_fraction: f64,
    pub write_fraction: f64,
    pub record_count: usize,
    pub query_count: usize,
    pub distribution: KeyDistribution,
    pub field_count: usize,
    pub field_length: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            name: "read_mostly".into(),
            read_fraction: 0.95,
            write_fraction: 0.05,
            record_count: 10_000,
            query_count: 10_000,
            distribution: KeyDistribution::default(),
            field_count: 10,
            field_length: 100,
        }
    }
}

/// Preset names with their (read, write) fractions, in protocol order.
pub const PRESETS: [(&str, f64, f64); 5] = [
    ("read_only", 1.0, 0.0),
    ("read_mostly", 0.95, 0.05),
    ("read_dominant", 0.75, 0.25),
    ("mix", 0.5, 0.5),
    ("write_heavy", 0.0, 1.0),
];

impl WorkloadSpec {
    pub fn preset(name: &str) -> Result<Self> {
        let (_, read, write) = PRESETS
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown workload preset {name:?}")))?;
        Ok(Self {
            name: name.to_owned(),
            read_fraction: *read,
            write_fraction: *write,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !frac_ok(self.read_fraction) || !frac_ok(self.write_fraction) {
            return Err(Error::InvalidArgument("fractions must lie in [0, 1]".into()));
        }
        if (self.read_fraction + self.write_fraction - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "read and write fractions must sum to 1, got {} + {}",
                self.read_fraction, self.write_fraction
            )));
        }
        if self.record_count == 0 || self.query_count == 0 || self.field_count == 0 {
            return Err(Error::InvalidArgument("record, query and field counts must be positive".into()));
        }
        match self.distribution {
            KeyDistribution::Zipfian { theta } if !(theta >= 0.0 && theta.is_finite()) => {
                Err(Error::InvalidArgument(format!("zipfian theta must be >= 0, got {theta}")))
            }
            KeyDistribution::Hotspot {
                hot_fraction,
                hot_opn_fraction,
            } if !(hot_fraction > 0.0 && hot_fraction <= 1.0 && frac_ok(hot_opn_fraction)) => {
                Err(Error::InvalidArgument("hotspot fractions out of range".into()))
            }
            KeyDistribution::PeriodicInvalidation { keys, period }
                if keys == 0 || keys > self.record_count || !(period > 0.0) =>
            {
                Err(Error::InvalidArgument(
                    "periodic invalidation needs 0 < keys <= record_count and a positive period".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

pub fn key_name(i: usize) -> String {
    format!("user{i}")
}

fn random_values<R: Rng>(rng: &mut R, fields: usize, len: usize) -> ResultSet {
    (0..fields)
        .map(|f| {
            let v: String = (&mut *rng).sample_iter(&Alphanumeric).take(len).map(char::from).collect();
            (format!("field{f}"), v)
        })
        .collect()
}

/// Inserts `user0..user{N-1}` with seeded random records; returns N.
pub fn load_phase(spec: &WorkloadSpec, backend: &mut Backend, seed: u64) -> Result<usize> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..spec.record_count {
        let values = random_values(&mut rng, spec.field_count, spec.field_length);
        backend.write(&key_name(i), values);
    }
    Ok(spec.record_count)
}

/// Zipf sampler over `0..n` with P(i) proportional to 1 / (i + 1)^theta,
/// drawn by inverting the exact cumulative distribution.
#[derive(Debug, Clone)]
pub struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("zipf needs at least one item".into()));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("zipf theta must be >= 0, got {theta}")));
        }
        let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-theta)).collect();
        let harmonic: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / harmonic;
                acc
            })
            .collect();
        Ok(Self { cdf })
    }

    pub fn pmf(&self, i: usize) -> f64 {
        match i {
            0 => self.cdf[0],
            _ => self.cdf[i] - self.cdf[i - 1],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Convenience wrapper for one-off draws.
pub fn zipf_sample<R: Rng + ?Sized>(n: usize, theta: f64, rng: &mut R) -> Result<usize> {
    Ok(Zipf::new(n, theta)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub kind: OpKind,
    pub key: String,
    /// Present exactly for writes.
    pub values: Option<ResultSet>,
    pub issue_time: f64,
}

#[derive(Debug, Clone)]
enum Sampler {
    Zipf(Zipf),
    Hotspot { hot: usize, hot_opn_fraction: f64 },
    Uniform,
    Periodic { keys: usize, gap: f64, next_due: f64, next_key: usize },
}

/// Deterministic operation stream for one phase.
#[derive(Debug, Clone)]
pub struct WorkloadGenerator {
    spec: WorkloadSpec,
    rng: ChaCha8Rng,
    sampler: Sampler,
    ops_per_second: f64,
    step: usize,
}

impl WorkloadGenerator {
    pub fn new(spec: WorkloadSpec, seed: u64, ops_per_second: f64) -> Result<Self> {
        spec.validate()?;
        if !(ops_per_second > 0.0) {
            return Err(Error::InvalidArgument("ops_per_second must be positive".into()));
        }
        let n = spec.record_count;
        let sampler = match spec.distribution {
            KeyDistribution::Zipfian { theta } => Sampler::Zipf(Zipf::new(n, theta)?),
            KeyDistribution::Hotspot {
                hot_fraction,
                hot_opn_fraction,
            } => Sampler::Hotspot {
                hot: ((n as f64 * hot_fraction) as usize).clamp(1, n),
                hot_opn_fraction,
            },
            KeyDistribution::Uniform => Sampler::Uniform,
            KeyDistribution::PeriodicInvalidation { keys, period } => Sampler::Periodic {
                keys,
                gap: period / keys as f64,
                next_due: 0.0,
                next_key: 0,
            },
        };
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sampler,
            ops_per_second,
            step: 0,
        })
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    pub fn remaining(&self) -> usize {
        self.spec.query_count - self.step
    }

    fn sample_key(&mut self) -> usize {
        let n = self.spec.record_count;
        match &self.sampler {
            Sampler::Zipf(z) => z.sample(&mut self.rng),
            Sampler::Hotspot { hot, hot_opn_fraction } => {
                let (hot, frac) = (*hot, *hot_opn_fraction);
                if hot == n || self.rng.gen::<f64>() < frac {
                    self.rng.gen_range(0..hot)
                } else {
                    self.rng.gen_range(hot..n)
                }
            }
            Sampler::Uniform => self.rng.gen_range(0..n),
            Sampler::Periodic { keys, .. } => {
                let k = *keys;
                self.rng.gen_range(0..k)
            }
        }
    }

    /// Next operation, or `None` once the phase's query count is reached.
    pub fn next_operation(&mut self) -> Option<Operation> {
        if self.step >= self.spec.query_count {
            return None;
        }
        let issue_time = self.step as f64 / self.ops_per_second;
        self.step += 1;
        let kind = if let Sampler::Periodic {
            keys,
            gap,
            next_due,
            next_key,
        } = &mut self.sampler
        {
            if issue_time >= *next_due {
                let key = *next_key;
                *next_key = (key + 1) % *keys;
                *next_due += *gap;
                let values = random_values(&mut self.rng, self.spec.field_count, self.spec.field_length);
                return Some(Operation {
                    kind: OpKind::Write,
                    key: key_name(key),
                    values: Some(values),
                    issue_time,
                });
            }
            OpKind::Read
        } else if self.rng.gen::<f64>() < self.spec.read_fraction {
            OpKind::Read
        } else {
            OpKind::Write
        };
        let key = key_name(self.sample_key());
        let values = match kind {
            OpKind::Read => None,
            OpKind::Write => Some(random_values(&mut self.rng, self.spec.field_count, self.spec.field_length)),
        };
        Some(Operation {
            kind,
            key,
            values,
            issue_time,
        })
    }
}

impl Iterator for WorkloadGenerator {
    type Item = Operation;

    fn next(&mut self) -> Option<Operation> {
        self.next_operation()
    }
}
