//! The cache manager: one request path that drives the cache, the backend,
//! the observer bus, the configured strategies and the metrics ledger.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{AdmissionAgent, AgentStats, AgentsConfig, EntryView, EvictionAgent, MultiTaskAgent, TtlAgent};
use crate::backend::{Backend, LatencyModel};
use crate::baselines::{should_cache, AdmissionPolicyKind, EvictionBook, EvictionPolicyKind, OperationType};
use crate::cache::{Cache, PutOutcome, ResultSet};
use crate::clock::{Clock, ClockMode};
use crate::error::{Error, Result};
use crate::metrics::{LiveStats, MetricsLedger};
use crate::observer::{KindSet, ObservationBus, SubscriberId};
use crate::workload::{load_phase, OpKind, Operation, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissionChoice {
    Baseline(AdmissionPolicyKind),
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionChoice {
    Baseline(EvictionPolicyKind),
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtlChoice {
    Fixed,
    Rl,
}

impl FromStr for AdmissionChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl_admission" => Ok(Self::Rl),
            other => other.parse().map(Self::Baseline),
        }
    }
}

impl FromStr for EvictionChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl_eviction" => Ok(Self::Rl),
            other => other.parse().map(Self::Baseline),
        }
    }
}

impl FromStr for TtlChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_ttl" => Ok(Self::Fixed),
            "rl_ttl" => Ok(Self::Rl),
            other => Err(Error::InvalidArgument(format!("unknown ttl strategy {other:?}"))),
        }
    }
}

impl fmt::Display for AdmissionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baseline(AdmissionPolicyKind::WriteThrough) => f.write_str("write_through"),
            Self::Baseline(AdmissionPolicyKind::WriteOnRead) => f.write_str("write_on_read"),
            Self::Rl => f.write_str("rl_admission"),
        }
    }
}

impl fmt::Display for EvictionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baseline(k) => k.fmt(f),
            Self::Rl => f.write_str("rl_eviction"),
        }
    }
}

impl fmt::Display for TtlChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed_ttl",
            Self::Rl => "rl_ttl",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategySpec {
    Split {
        admission: AdmissionChoice,
        eviction: EvictionChoice,
        ttl: TtlChoice,
    },
    MultiTask,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self::Split {
            admission: AdmissionChoice::Baseline(AdmissionPolicyKind::WriteThrough),
            eviction: EvictionChoice::Baseline(EvictionPolicyKind::Lru),
            ttl: TtlChoice::Fixed,
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Split { admission, eviction, ttl } => write!(f, "{admission}+{eviction}+{ttl}"),
            Self::MultiTask => f.write_str("rl_multitask"),
        }
    }
}

/// Everything needed to build a manager for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerSettings {
    pub capacity: usize,
    pub max_ttl: f64,
    pub fixed_ttl: f64,
    pub strategy: StrategySpec,
    pub agents: AgentsConfig,
    pub clock_mode: ClockMode,
    pub ops_per_second: f64,
    pub window: u64,
    pub latency: LatencyModel,
}

impl Default for ManagerSettings {
    fn default() -> Self {
        Self {
            capacity: 5000,
            max_ttl: 120.0,
            fixed_ttl: 60.0,
            strategy: StrategySpec::default(),
            agents: AgentsConfig::default(),
            clock_mode: ClockMode::Virtual,
            ops_per_second: 100.0,
            window: 1000,
            latency: LatencyModel::default(),
        }
    }
}

/// Independent seed for one consumer of randomness (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub mod streams {
    pub const BACKEND: u64 = 1;
    pub const LOAD: u64 = 2;
    pub const WORKLOAD: u64 = 3;
    pub const ADMISSION: u64 = 4;
    pub const EVICTION: u64 = 5;
    pub const TTL: u64 = 6;
    pub const MULTITASK: u64 = 7;
}

enum AdmissionSlot {
    Baseline(AdmissionPolicyKind),
    Rl(Box<AdmissionAgent>),
}

enum EvictionSlot {
    Baseline(EvictionBook),
    Rl(Box<EvictionAgent>),
}

enum TtlSlot {
    Fixed(f64),
    Rl(Box<TtlAgent>),
}

enum Strategies {
    Split {
        admission: AdmissionSlot,
        eviction: EvictionSlot,
        ttl: TtlSlot,
    },
    MultiTask(Box<MultiTaskAgent>),
}

impl Strategies {
    fn build(settings: &ManagerSettings, seed: u64) -> Result<Self> {
        let cfg = &settings.agents;
        let max_ttl = settings.max_ttl;
        Ok(match settings.strategy {
            StrategySpec::MultiTask => Strategies::MultiTask(Box::new(MultiTaskAgent::new(
                cfg,
                max_ttl,
                derive_seed(seed, streams::MULTITASK),
            )?)),
            StrategySpec::Split { admission, eviction, ttl } => Strategies::Split {
                admission: match admission {
                    AdmissionChoice::Baseline(k) => AdmissionSlot::Baseline(k),
                    AdmissionChoice::Rl => AdmissionSlot::Rl(Box::new(AdmissionAgent::new(
                        cfg,
                        max_ttl,
                        derive_seed(seed, streams::ADMISSION),
                    )?)),
                },
                eviction: match eviction {
                    EvictionChoice::Baseline(k) => EvictionSlot::Baseline(EvictionBook::new(k)),
                    EvictionChoice::Rl => EvictionSlot::Rl(Box::new(EvictionAgent::new(
                        cfg,
                        max_ttl,
                        derive_seed(seed, streams::EVICTION),
                    )?)),
                },
                ttl: match ttl {
                    TtlChoice::Fixed => TtlSlot::Fixed(settings.fixed_ttl),
                    TtlChoice::Rl => {
                        TtlSlot::Rl(Box::new(TtlAgent::new(cfg, max_ttl, derive_seed(seed, streams::TTL))?))
                    }
                },
            },
        })
    }

    fn on_observation(&mut self, obs: &crate::observer::Observation) -> Result<()> {
        match self {
            Strategies::MultiTask(m) => m.on_observation(obs),
            Strategies::Split { admission, eviction, ttl } => {
                if let AdmissionSlot::Rl(a) = admission {
                    a.on_observation(obs)?;
                }
                match eviction {
                    EvictionSlot::Baseline(book) => book.observe(obs),
                    EvictionSlot::Rl(e) => e.on_observation(obs)?,
                }
                if let TtlSlot::Rl(t) = ttl {
                    t.on_observation(obs)?;
                }
                Ok(())
            }
        }
    }

    fn sweep(&mut self, now: f64) -> Result<()> {
        match self {
            Strategies::MultiTask(m) => m.sweep(now),
            Strategies::Split { admission, eviction, ttl } => {
                if let AdmissionSlot::Rl(a) = admission {
                    a.sweep(now)?;
                }
                if let EvictionSlot::Rl(e) = eviction {
                    e.sweep(now)?;
                }
                if let TtlSlot::Rl(t) = ttl {
                    t.sweep(now)?;
                }
                Ok(())
            }
        }
    }
}

/// Per-agent totals, present only for learning strategies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub admission: Option<AgentStats>,
    pub eviction: Option<AgentStats>,
    pub ttl: Option<AgentStats>,
    pub multitask: Option<AgentStats>,
}

/// Result of a client read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadResult {
    pub values: ResultSet,
    pub hit: bool,
}

pub struct CacheManager {
    settings: ManagerSettings,
    clock: Clock,
    cache: Cache,
    backend: Backend,
    bus: ObservationBus,
    strategies: Strategies,
    ledger: MetricsLedger,
    ledger_inbox: SubscriberId,
    strategy_inbox: SubscriberId,
    swept_until: f64,
    seed: u64,
}

impl fmt::Debug for CacheManager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CacheManager")
            .field("strategy", &self.settings.strategy)
            .field("capacity", &self.settings.capacity)
            .field("resident", &self.cache.len())
            .field("now", &self.clock.now())
            .finish()
    }
}

impl CacheManager {
    pub fn new(settings: ManagerSettings, seed: u64) -> Result<Self> {
        if !(settings.max_ttl > 0.0) || !(settings.fixed_ttl >= 0.0) {
            return Err(Error::InvalidArgument("max_ttl must be positive and fixed_ttl non-negative".into()));
        }
        let clock = Clock::new(settings.clock_mode, settings.ops_per_second)?;
        let cache = Cache::new(settings.capacity)?;
        let backend = Backend::new(settings.latency, derive_seed(seed, streams::BACKEND))?;
        let mut bus = ObservationBus::new();
        let ledger_inbox = bus.subscribe(KindSet::all())?;
        let strategy_inbox = bus.subscribe(KindSet::all())?;
        let strategies = Strategies::build(&settings, seed)?;
        let ledger = MetricsLedger::new(settings.window)?;
        Ok(Self {
            settings,
            clock,
            cache,
            backend,
            bus,
            strategies,
            ledger,
            ledger_inbox,
            strategy_inbox,
            swept_until: 0.0,
            seed,
        })
    }

    pub fn settings(&self) -> &ManagerSettings {
        &self.settings
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut Backend {
        &mut self.backend
    }

    pub fn ledger(&self) -> &MetricsLedger {
        &self.ledger
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    /// Seeds the backend with the workload's records.
    pub fn load(&mut self, spec: &WorkloadSpec) -> Result<usize> {
        load_phase(spec, &mut self.backend, derive_seed(self.seed, streams::LOAD))
    }

    pub fn start_phase(&mut self, name: &str) {
        let u = self.cache.utilization();
        self.ledger.start_phase(name, u);
    }

    /// Closes any partial metrics window.
    pub fn flush(&mut self) {
        let u = self.cache.utilization();
        self.ledger.flush(u);
    }

    pub fn live_stats(&mut self) -> LiveStats {
        let u = self.cache.utilization();
        self.ledger.live(u)
    }

    pub fn strategy_stats(&self) -> StrategyStats {
        let mut s = StrategyStats::default();
        match &self.strategies {
            Strategies::MultiTask(m) => s.multitask = Some(m.stats()),
            Strategies::Split { admission, eviction, ttl } => {
                if let AdmissionSlot::Rl(a) = admission {
                    s.admission = Some(a.stats());
                }
                if let EvictionSlot::Rl(e) = eviction {
                    s.eviction = Some(e.stats());
                }
                if let TtlSlot::Rl(t) = ttl {
                    s.ttl = Some(t.stats());
                }
            }
        }
        s
    }

    pub fn admission_agent(&self) -> Option<&AdmissionAgent> {
        match &self.strategies {
            Strategies::Split {
                admission: AdmissionSlot::Rl(a),
                ..
            } => Some(a),
            _ => None,
        }
    }

    pub fn eviction_agent(&self) -> Option<&EvictionAgent> {
        match &self.strategies {
            Strategies::Split {
                eviction: EvictionSlot::Rl(e),
                ..
            } => Some(e),
            _ => None,
        }
    }

    pub fn ttl_agent_mut(&mut self) -> Option<&mut TtlAgent> {
        match &mut self.strategies {
            Strategies::Split { ttl: TtlSlot::Rl(t), .. } => Some(t),
            _ => None,
        }
    }

    pub fn multitask_agent(&self) -> Option<&MultiTaskAgent> {
        match &self.strategies {
            Strategies::MultiTask(m) => Some(m),
            _ => None,
        }
    }

    /// Delivers queued observations to the ledger and the strategies.
    fn pump(&mut self) -> Result<()> {
        for obs in self.bus.drain(self.ledger_inbox) {
            self.ledger.observe(&obs);
        }
        for obs in self.bus.drain(self.strategy_inbox) {
            self.strategies.on_observation(&obs)?;
        }
        Ok(())
    }

    /// Runs the once-per-second sweeps for every whole second up to `now`.
    fn advance_to(&mut self, now: f64) -> Result<()> {
        while self.swept_until + 1.0 <= now {
            let t = self.swept_until + 1.0;
            self.cache.sweep_expired(t, &mut self.bus);
            self.pump()?;
            self.strategies.sweep(t)?;
            self.ledger.sweep(t);
            self.swept_until = t;
        }
        Ok(())
    }

    fn begin(&mut self) -> Result<f64> {
        let now = self.clock.tick();
        self.advance_to(now)?;
        Ok(now)
    }

    fn end(&mut self) -> Result<()> {
        self.pump()?;
        let u = self.cache.utilization();
        self.ledger.end_request(u);
        Ok(())
    }

    /// Cache-then-backend read. Unknown keys fail before anything is counted.
    pub fn read(&mut self, key: &str) -> Result<ReadResult> {
        if !self.backend.contains(key) {
            return Err(Error::NotFound(key.to_owned()));
        }
        let now = self.begin()?;
        let hit = match self.cache.get(key, now, &mut self.bus) {
            crate::cache::GetOutcome::Hit(e) => Some(e.values.clone()),
            crate::cache::GetOutcome::Miss => None,
        };
        let result = match hit {
            Some(values) => ReadResult { values, hit: true },
            None => {
                self.pump()?;
                let (values, latency) = self.backend.read(key)?;
                self.admit(key, OperationType::ReadMissFetch, &values, latency, now)?;
                ReadResult { values, hit: false }
            }
        };
        self.end()?;
        Ok(result)
    }

    /// Writes to the backend, invalidates the cached copy, then lets the
    /// admission strategy decide whether to cache the new value.
    pub fn write(&mut self, key: &str, values: ResultSet) -> Result<()> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("a write needs at least one field".into()));
        }
        let now = self.begin()?;
        self.backend.write(key, values.clone());
        let latency = self.backend.latency(key).expect("just written");
        self.cache.invalidate(key, now, &mut self.bus);
        self.pump()?;
        self.admit(key, OperationType::Write, &values, latency, now)?;
        self.end()
    }

    /// Invalidates the cached copy; the backend keeps the record.
    pub fn delete(&mut self, key: &str) -> Result<()> {
        let now = self.begin()?;
        self.cache.invalidate(key, now, &mut self.bus);
        self.end()
    }

    pub fn apply(&mut self, op: &Operation) -> Result<bool> {
        match op.kind {
            OpKind::Read => self.read(&op.key).map(|r| r.hit),
            OpKind::Write => {
                let values = op
                    .values
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("write without values".into()))?;
                self.write(&op.key, values).map(|_| false)
            }
        }
    }

    fn admit(&mut self, key: &str, op: OperationType, values: &ResultSet, latency: f64, now: f64) -> Result<()> {
        let utilization = self.cache.utilization();
        let mut view = EntryView {
            key,
            op,
            values,
            ttl: 0.0,
            retrieval_time: latency,
            hit_count: 0,
        };
        let (ttl, rl_ttl) = match &mut self.strategies {
            Strategies::MultiTask(m) => match m.admit(&view, utilization, now)? {
                Some(ttl) => (ttl, false),
                None => return Ok(()),
            },
            Strategies::Split { admission, ttl, .. } => {
                let (proposed, rl_ttl) = match ttl {
                    TtlSlot::Fixed(t) => (*t, false),
                    TtlSlot::Rl(agent) => (agent.propose(&view, utilization)?, true),
                };
                view.ttl = proposed;
                let cache = match admission {
                    AdmissionSlot::Baseline(p) => should_cache(*p, op),
                    AdmissionSlot::Rl(agent) => agent.decide(&view, now)?,
                };
                if !cache {
                    if let TtlSlot::Rl(agent) = ttl {
                        agent.discard();
                    }
                    return Ok(());
                }
                (proposed, rl_ttl)
            }
        };
        self.store(key, values.clone(), ttl, latency, now)?;
        if rl_ttl {
            if let Strategies::Split { ttl: TtlSlot::Rl(agent), .. } = &mut self.strategies {
                agent.commit(key, now)?;
            }
        }
        Ok(())
    }

    fn store(&mut self, key: &str, values: ResultSet, ttl: f64, latency: f64, now: f64) -> Result<()> {
        if !self.cache.has_room_for(key) {
            self.make_room(key, now)?;
        }
        match self.cache.put(key, values, ttl, latency, now, &mut self.bus)? {
            PutOutcome::Stored => self.pump(),
            PutOutcome::RejectedFull => Err(Error::Precondition("no room after eviction".into())),
        }
    }

    fn make_room(&mut self, key: &str, now: f64) -> Result<()> {
        self.cache.sweep_expired(now, &mut self.bus);
        self.pump()?;
        if self.cache.has_room_for(key) {
            return Ok(());
        }
        let utilization = self.cache.utilization();
        let victims = match &mut self.strategies {
            Strategies::MultiTask(m) => m.scan(&self.cache, utilization, now)?,
            Strategies::Split { eviction, .. } => match eviction {
                EvictionSlot::Baseline(book) => vec![book.select_victim()?.to_owned()],
                EvictionSlot::Rl(agent) => agent.scan(&self.cache, now)?,
            },
        };
        self.ledger.record_eviction_event(
            &victims,
            self.cache.entries().map(|e| (e.key.as_str(), e.remaining(now))),
            now,
        );
        for v in &victims {
            self.cache.evict(v, now, &mut self.bus);
        }
        self.pump()
    }
}
