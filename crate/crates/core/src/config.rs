//! Experiment configuration: JSON on disk, defaults for everything, unknown
//! fields rejected, and errors that name the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentsConfig;
use crate::backend::LatencyModel;
use crate::clock::ClockMode;
use crate::error::{Error, Result};
use crate::manager::{AdmissionChoice, EvictionChoice, ManagerSettings, StrategySpec, TtlChoice};
use crate::workload::{KeyDistribution, WorkloadSpec, PRESETS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    pub mode: ClockMode,
    pub ops_per_second: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            mode: ClockMode::Virtual,
            ops_per_second: 100.0,
        }
    }
}

/// A workload phase: a preset name or a full custom spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseConfig {
    Preset(String),
    Custom(WorkloadSpec),
}

/// Size profile: `desk` runs 10,000 queries per phase with a 120 s TTL cap,
/// `paper_scale` 100,000 queries with a one-hour cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    PaperScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub profile: Profile,
    /// "write_through", "write_on_read" or "rl_admission".
    pub admission: Option<String>,
    /// "lru", "lfu", "fifo" or "rl_eviction".
    pub eviction: Option<String>,
    /// "fixed_ttl" or "rl_ttl".
    pub ttl: Option<String>,
    /// "multitask" fills all three slots with one agent.
    pub strategy: Option<String>,
    pub capacity: usize,
    pub max_ttl: Option<f64>,
    pub fixed_ttl: f64,
    pub record_count: usize,
    pub query_count: Option<usize>,
    /// Key distribution for preset phases.
    pub distribution: KeyDistribution,
    pub phases: Vec<PhaseConfig>,
    pub seeds: Option<Vec<u64>>,
    pub repetitions: Option<usize>,
    pub clock: ClockConfig,
    pub window: u64,
    pub agents: AgentsConfig,
    pub latency: LatencyModel,
    /// Multiplies every phase length and the exploration decay.
    pub scale: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            profile: Profile::Desk,
            admission: None,
            eviction: None,
            ttl: None,
            strategy: None,
            capacity: 5000,
            max_ttl: None,
            fixed_ttl: 60.0,
            record_count: 10_000,
            query_count: None,
            distribution: KeyDistribution::default(),
            phases: PRESETS.iter().map(|(n, _, _)| PhaseConfig::Preset((*n).to_owned())).collect(),
            seeds: None,
            repetitions: None,
            clock: ClockConfig::default(),
            window: 1000,
            agents: AgentsConfig::default(),
            latency: LatencyModel::default(),
            scale: 1.0,
            output_dir: None,
        }
    }
}

pub const DEFAULT_REPETITIONS: usize = 3;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy_spec()?;
        if self.capacity == 0 {
            return Err(Error::config("capacity", "must be positive"));
        }
        if !(self.max_ttl() > 0.0) {
            return Err(Error::config("max_ttl", "must be positive"));
        }
        if !(self.fixed_ttl >= 0.0) {
            return Err(Error::config("fixed_ttl", "must be non-negative"));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be positive"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config("scale", "must be positive"));
        }
        if !(self.clock.ops_per_second > 0.0) {
            return Err(Error::config("clock.ops_per_second", "must be positive"));
        }
        if self.phases.is_empty() {
            return Err(Error::config("phases", "need at least one phase"));
        }
        if self.repetitions == Some(0) {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return Err(Error::config("seeds", "must not be empty"));
            }
            if let Some(r) = self.repetitions {
                if r != seeds.len() {
                    return Err(Error::config(
                        "repetitions",
                        format!("{r} repetitions but {} seeds", seeds.len()),
                    ));
                }
            }
        }
        for (i, p) in self.workload_phases()?.iter().enumerate() {
            p.validate().map_err(|e| Error::config(format!("phases[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn strategy_spec(&self) -> Result<StrategySpec> {
        match self.strategy.as_deref() {
            Some("multitask") | Some("rl_multitask") => {
                for (field, v) in [("admission", &self.admission), ("eviction", &self.eviction), ("ttl", &self.ttl)] {
                    if v.is_some() {
                        return Err(Error::config(
                            field,
                            "cannot be set together with strategy \"multitask\"",
                        ));
                    }
                }
                Ok(StrategySpec::MultiTask)
            }
            Some(other) => Err(Error::config("strategy", format!("unknown strategy {other:?}"))),
            None => {
                let admission = match &self.admission {
                    Some(s) => s.parse::<AdmissionChoice>().map_err(|e| Error::config("admission", e.to_string()))?,
                    None => "write_through".parse()?,
                };
                let eviction = match &self.eviction {
                    Some(s) => s.parse::<EvictionChoice>().map_err(|e| Error::config("eviction", e.to_string()))?,
                    None => "lru".parse()?,
                };
                let ttl = match &self.ttl {
                    Some(s) => s.parse::<TtlChoice>().map_err(|e| Error::config("ttl", e.to_string()))?,
                    None => TtlChoice::Fixed,
                };
                Ok(StrategySpec::Split { admission, eviction, ttl })
            }
        }
    }

    pub fn max_ttl(&self) -> f64 {
        self.max_ttl.unwrap_or(match self.profile {
            Profile::Desk => 120.0,
            Profile::PaperScale => 3600.0,
        })
    }

    /// Queries per preset phase before scaling.
    pub fn query_count(&self) -> usize {
        self.query_count.unwrap_or(match self.profile {
            Profile::Desk => 10_000,
            Profile::PaperScale => 100_000,
        })
    }

    fn scaled(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(1)
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (1..=self.repetitions.unwrap_or(DEFAULT_REPETITIONS) as u64).collect(),
        }
    }

    /// Phases with presets expanded and lengths scaled.
    pub fn workload_phases(&self) -> Result<Vec<WorkloadSpec>> {
        self.phases
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut spec = match p {
                    PhaseConfig::Preset(name) => {
                        let mut s = WorkloadSpec::preset(name).map_err(|e| Error::config(format!("phases[{i}]"), e.to_string()))?;
                        s.record_count = self.record_count;
                        s.query_count = self.query_count();
                        s.distribution = self.distribution.clone();
                        s
                    }
                    PhaseConfig::Custom(s) => s.clone(),
                };
                spec.query_count = self.scaled(spec.query_count);
                Ok(spec)
            })
            .collect()
    }

    /// Records the load phase inserts: enough for every phase.
    pub fn load_spec(&self) -> Result<WorkloadSpec> {
        let phases = self.workload_phases()?;
        let mut spec = phases[0].clone();
        spec.record_count = phases.iter().map(|p| p.record_count).max().unwrap_or(self.record_count);
        Ok(spec)
    }

    pub fn manager_settings(&self) -> Result<ManagerSettings> {
        let mut agents = self.agents.clone();
        agents.dqn.epsilon.decay_steps = self.scaled(agents.dqn.epsilon.decay_steps as usize) as u64;
        Ok(ManagerSettings {
            capacity: self.capacity,
            max_ttl: self.max_ttl(),
            fixed_ttl: self.fixed_ttl,
            strategy: self.strategy_spec()?,
            agents,
            clock_mode: self.clock.mode,
            ops_per_second: self.clock.ops_per_second,
            window: self.window,
            latency: self.latency,
        })
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{AdmissionPolicyKind, EvictionPolicyKind};

    #[test]
    fn empty_config_gets_defaults() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c.capacity, 5000);
        assert_eq!(c.fixed_ttl, 60.0);
        assert_eq!(c.max_ttl(), 120.0);
        assert_eq!(
            c.strategy_spec().unwrap(),
            StrategySpec::Split {
                admission: AdmissionChoice::Baseline(AdmissionPolicyKind::WriteThrough),
                eviction: EvictionChoice::Baseline(EvictionPolicyKind::Lru),
                ttl: TtlChoice::Fixed,
            }
        );
        assert_eq!(c.seeds(), vec![1, 2, 3]);
        let phases = c.workload_phases().unwrap();
        assert_eq!(phases.len(), 5);
        assert!(phases.iter().all(|p| p.query_count == 10_000));
        assert_eq!(c.agents.dqn.gamma, 0.99);
        assert_eq!(c.agents.sac.alpha, 0.2);
    }

    #[test]
    fn multitask_with_a_slot_is_contradictory() {
        let err = ExperimentConfig::from_json(r#"{"strategy": "multitask", "eviction": "lru"}"#).unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "eviction"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"capacity": 0}"#),
            Err(Error::Config { path, .. }) if path == "capacity"
        ));
    }

    #[test]
    fn unknown_fields_name_their_path() {
        match ExperimentConfig::from_json(r#"{"agents": {"dqn": {"gama": 0.9}}}"#).unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "agents.dqn.gama");
                assert!(message.contains("unknown field"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_json_is_a_config_error() {
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config { .. })));
    }

    #[test]
    fn missing_file_is_a_config_error() {
        assert!(matches!(
            ExperimentConfig::from_file(Path::new("/definitely/not/here.json")),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn seeds_and_repetitions_must_agree() {
        assert!(ExperimentConfig::from_json(r#"{"seeds": [1, 2], "repetitions": 3}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"repetitions": 13}"#).unwrap();
        assert_eq!(c.seeds().len(), 13);
        assert!(ExperimentConfig::from_json(r#"{"repetitions": 0}"#).is_err());
    }

    #[test]
    fn scale_and_profile() {
        let c = ExperimentConfig::from_json(r#"{"scale": 0.1, "phases": ["mix"]}"#).unwrap();
        assert_eq!(c.workload_phases().unwrap()[0].query_count, 1000);
        assert_eq!(c.manager_settings().unwrap().agents.dqn.epsilon.decay_steps, 5000);
        let p = ExperimentConfig::from_json(r#"{"profile": "paper_scale"}"#).unwrap();
        assert_eq!(p.query_count(), 100_000);
        assert_eq!(p.max_ttl(), 3600.0);
    }

    #[test]
    fn custom_phases_and_strategy_names() {
        let c = ExperimentConfig::from_json(
            r#"{"admission": "rl_admission", "ttl": "rl_ttl",
                "phases": ["read_only", {"name": "p", "read_fraction": 1.0, "write_fraction": 0.0,
                  "distribution": {"periodic_invalidation": {"keys": 50, "period": 40.0}}}]}"#,
        )
        .unwrap();
        assert_eq!(c.workload_phases().unwrap()[1].name, "p");
        assert!(ExperimentConfig::from_json(r#"{"admission": "sometimes"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"phases": ["bogus"]}"#).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json("{}").unwrap();
        let b = ExperimentConfig::from_json(r#"{"capacity": 5000}"#).unwrap();
        let c = ExperimentConfig::from_json(r#"{"capacity": 4999}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
