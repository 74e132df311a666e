//! Evaluation metrics: windowed hit and caching rates, eviction decision
//! confusion counts with precision/recall/F1, and TTL deviation from the
//! hindsight-optimal TTL.

use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::deadline::DeadlineQueue;
use crate::error::{Error, Result};
use crate::observer::{Observation, ObservationKind};

/// Objects with no read this long after insertion have an optimal TTL of 0.
pub const OPTIMAL_TTL_HORIZON: f64 = 1800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvictionConfusion {
    pub true_evict: u64,
    pub false_evict: u64,
    pub true_miss: u64,
    pub false_miss: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionKind {
    Evict,
    Keep,
}

impl FromStr for DecisionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evict" => Ok(Self::Evict),
            "keep" => Ok(Self::Keep),
            other => Err(Error::InvalidArgument(format!("unknown decision kind {other:?}"))),
        }
    }
}

/// How a watched eviction decision ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionOutcome {
    Requested,
    Invalidated,
    /// Nothing happened before the watch ran out.
    Silent,
}

impl EvictionConfusion {
    pub fn record(&mut self, kind: DecisionKind, outcome: DecisionOutcome) {
        match (kind, outcome) {
            (DecisionKind::Evict, DecisionOutcome::Requested) => self.false_evict += 1,
            (DecisionKind::Evict, _) => self.true_evict += 1,
            (DecisionKind::Keep, DecisionOutcome::Requested) => self.true_miss += 1,
            (DecisionKind::Keep, _) => self.false_miss += 1,
        }
    }

    pub fn add(&mut self, other: &EvictionConfusion) {
        self.true_evict += other.true_evict;
        self.false_evict += other.false_evict;
        self.true_miss += other.true_miss;
        self.false_miss += other.false_miss;
    }

    pub fn total(&self) -> u64 {
        self.true_evict + self.false_evict + self.true_miss + self.false_miss
    }

    pub fn precision_recall_f1(&self) -> (f64, f64, f64) {
        precision_recall_f1(self)
    }
}

/// Parses the decision kind by name, then records the outcome.
pub fn record_decision_outcome(c: &mut EvictionConfusion, kind: &str, outcome: DecisionOutcome) -> Result<()> {
    c.record(kind.parse()?, outcome);
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// precision = (TE+TM)/(TE+TM+FE), recall = (TE+TM)/(TE+TM+FM), F1 their
/// harmonic mean; any zero denominator yields 0.
pub fn precision_recall_f1(c: &EvictionConfusion) -> (f64, f64, f64) {
    let correct = (c.true_evict + c.true_miss) as f64;
    let precision = ratio(correct, correct + c.false_evict as f64);
    let recall = ratio(correct, correct + c.false_miss as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    (precision, recall, f1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TtlEvent {
    Inserted(f64),
    Hit(f64),
    Invalidated(f64),
}

/// Hindsight-optimal TTL of one object from its event history, which must
/// start with the insertion. With at least one hit inside the horizon the
/// optimum runs to the invalidation if there was one, else to the last hit.
/// Without hits it is 0.
pub fn optimal_ttl(history: &[TtlEvent]) -> Result<f64> {
    let Some(&TtlEvent::Inserted(t0)) = history.first() else {
        return Err(Error::InvalidArgument("history must start with the insertion".into()));
    };
    let mut last_hit = None;
    let mut invalidated = None;
    for e in &history[1..] {
        match *e {
            TtlEvent::Hit(t) if t - t0 <= OPTIMAL_TTL_HORIZON && invalidated.is_none() => last_hit = Some(t),
            TtlEvent::Invalidated(t) if invalidated.is_none() => invalidated = Some(t),
            TtlEvent::Inserted(_) => {
                return Err(Error::InvalidArgument("history holds a second insertion".into()));
            }
            _ => {}
        }
    }
    Ok(match (last_hit, invalidated) {
        (None, _) => 0.0,
        (Some(_), Some(inv)) => inv - t0,
        (Some(h), None) => h - t0,
    })
}

#[derive(Debug, Clone, Copy)]
struct WatchedDecision {
    kind: DecisionKind,
}

/// Scores eviction decisions against what happens next.
///
/// Decisions persist: a resident entry that survives several eviction events
/// keeps the single Keep record from the first of them until it resolves.
#[derive(Debug, Clone, Default)]
pub struct EvictionTracker {
    active: FxHashMap<String, WatchedDecision>,
    deadlines: DeadlineQueue<String>,
    finished: EvictionConfusion,
}

impl EvictionTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self) -> usize {
        self.active.len()
    }

    /// Counts finished since the last take.
    pub fn take_finished(&mut self) -> EvictionConfusion {
        std::mem::take(&mut self.finished)
    }

    fn finish(&mut self, key: &str, outcome: DecisionOutcome) {
        if let Some(d) = self.active.remove(key) {
            self.deadlines.remove(key);
            self.finished.record(d.kind, outcome);
        }
    }

    fn start(&mut self, key: &str, kind: DecisionKind, deadline: f64) {
        self.active.insert(key.to_owned(), WatchedDecision { kind });
        self.deadlines.insert(key.to_owned(), deadline);
    }

    /// Registers one eviction event: `victims` are evicted, every other entry in
    /// `residents` (key, seconds of TTL left) is implicitly kept.
    pub fn record_event<'a, I>(&mut self, victims: &[String], residents: I, now: f64)
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut victim_left = Vec::with_capacity(victims.len());
        for (key, left) in residents {
            if victims.iter().any(|v| v == key) {
                victim_left.push((key, left));
            } else if !self.active.contains_key(key) {
                self.start(key, DecisionKind::Keep, now + left);
            }
        }
        for (key, left) in victim_left {
            // A kept entry evicted before anyone read it was kept for nothing.
            self.finish(key, DecisionOutcome::Silent);
            self.start(key, DecisionKind::Evict, now + left);
        }
    }

    pub fn observe(&mut self, obs: &Observation) {
        let Some(d) = self.active.get(&obs.key).copied() else {
            return;
        };
        match (d.kind, obs.kind) {
            (DecisionKind::Keep, ObservationKind::Hit) | (DecisionKind::Evict, ObservationKind::Miss) => {
                self.finish(&obs.key, DecisionOutcome::Requested)
            }
            (_, ObservationKind::Invalidate) => self.finish(&obs.key, DecisionOutcome::Invalidated),
            (DecisionKind::Keep, ObservationKind::Expire) => self.finish(&obs.key, DecisionOutcome::Silent),
            _ => {}
        }
    }

    pub fn sweep(&mut self, now: f64) {
        while let Some((key, _)) = self.deadlines.pop_due(now) {
            let d = self.active.remove(&key).expect("queue and map agree");
            self.finished.record(d.kind, DecisionOutcome::Silent);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct TtlRecord {
    estimated: f64,
    inserted: f64,
    last_read: Option<f64>,
}

/// Compares every TTL the cache was given with the optimal TTL observed in
/// hindsight. A record closes on invalidation, on re-insertion of the key, or
/// once the horizon has passed.
#[derive(Debug, Clone, Default)]
pub struct TtlTracker {
    active: FxHashMap<String, TtlRecord>,
    horizon: DeadlineQueue<String>,
    deviation_sum: f64,
    count: u64,
}

impl TtlTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// (sum of |estimated - optimal|, record count) since the last take.
    pub fn take_finished(&mut self) -> (f64, u64) {
        let out = (self.deviation_sum, self.count);
        self.deviation_sum = 0.0;
        self.count = 0;
        out
    }

    fn close(&mut self, key: &str, invalidated_at: Option<f64>) {
        let Some(r) = self.active.remove(key) else {
            return;
        };
        self.horizon.remove(key);
        let mut history = vec![TtlEvent::Inserted(r.inserted)];
        history.extend(r.last_read.map(TtlEvent::Hit));
        history.extend(invalidated_at.map(TtlEvent::Invalidated));
        let optimal = optimal_ttl(&history).expect("history starts with the insertion");
        self.deviation_sum += (r.estimated - optimal).abs();
        self.count += 1;
    }

    pub fn observe(&mut self, obs: &Observation) {
        match obs.kind {
            ObservationKind::WriteSet => {
                self.close(&obs.key, None);
                let estimated = obs.entry.map_or(0.0, |m| m.ttl);
                self.active.insert(
                    obs.key.clone(),
                    TtlRecord {
                        estimated,
                        inserted: obs.at,
                        last_read: None,
                    },
                );
                self.horizon.insert(obs.key.clone(), obs.at + OPTIMAL_TTL_HORIZON);
            }
            // A read counts whether or not the entry was still cached: a miss
            // after expiry shows the TTL was too short.
            ObservationKind::Hit | ObservationKind::Miss => {
                if let Some(r) = self.active.get_mut(&obs.key) {
                    r.last_read = Some(obs.at);
                }
            }
            ObservationKind::Invalidate => self.close(&obs.key, Some(obs.at)),
            ObservationKind::Expire | ObservationKind::EvictionDecision => {}
        }
    }

    pub fn sweep(&mut self, now: f64) {
        while let Some((key, _)) = self.horizon.pop_due(now) {
            self.horizon.insert(key.clone(), f64::NEG_INFINITY);
            self.close(&key, None);
        }
    }
}

/// One closed metrics window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub phase: String,
    pub window_index: usize,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub commits: u64,
    pub confusion: EvictionConfusion,
    pub ttl_deviation_sum: f64,
    pub ttl_records: u64,
    pub utilization: f64,
}

impl WindowStats {
    fn empty(phase: &str, window_index: usize) -> Self {
        Self {
            phase: phase.to_owned(),
            window_index,
            requests: 0,
            hits: 0,
            misses: 0,
            commits: 0,
            confusion: EvictionConfusion::default(),
            ttl_deviation_sum: 0.0,
            ttl_records: 0,
            utilization: 0.0,
        }
    }

    pub fn hit_rate(&self) -> f64 {
        ratio(self.hits as f64, (self.hits + self.misses) as f64)
    }

    pub fn caching_rate(&self) -> f64 {
        ratio(self.commits as f64, self.requests as f64)
    }

    pub fn mean_ttl_deviation(&self) -> f64 {
        ratio(self.ttl_deviation_sum, self.ttl_records as f64)
    }

    pub fn precision_recall_f1(&self) -> (f64, f64, f64) {
        precision_recall_f1(&self.confusion)
    }

    fn absorb(&mut self, other: &WindowStats) {
        self.requests += other.requests;
        self.hits += other.hits;
        self.misses += other.misses;
        self.commits += other.commits;
        self.confusion.add(&other.confusion);
        self.ttl_deviation_sum += other.ttl_deviation_sum;
        self.ttl_records += other.ttl_records;
        self.utilization = other.utilization;
    }
}

/// Summary of the ledger at a point in time, served by the HTTP facade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveStats {
    pub request_count: u64,
    pub hit_rate: f64,
    pub caching_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_ttl_deviation: f64,
    pub utilization: f64,
    pub window: WindowStats,
    pub windows_closed: usize,
}

/// Request-level accounting split into fixed-size windows.
#[derive(Debug, Clone)]
pub struct MetricsLedger {
    window_size: u64,
    phase: String,
    current: WindowStats,
    closed: Vec<WindowStats>,
    totals: WindowStats,
    eviction: EvictionTracker,
    ttl: TtlTracker,
}

impl MetricsLedger {
    pub fn new(window_size: u64) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::InvalidArgument("window size must be positive".into()));
        }
        Ok(Self {
            window_size,
            phase: String::new(),
            current: WindowStats::empty("", 0),
            closed: Vec::new(),
            totals: WindowStats::empty("", 0),
            eviction: EvictionTracker::new(),
            ttl: TtlTracker::new(),
        })
    }

    pub fn windows(&self) -> &[WindowStats] {
        &self.closed
    }

    pub fn totals(&self) -> &WindowStats {
        &self.totals
    }

    pub fn current(&self) -> &WindowStats {
        &self.current
    }

    /// Closes any partial window and labels subsequent windows with `name`.
    pub fn start_phase(&mut self, name: &str, utilization: f64) {
        self.flush(utilization);
        self.phase = name.to_owned();
        self.current.phase = name.to_owned();
    }

    /// Closes the current window if it holds any request.
    pub fn flush(&mut self, utilization: f64) {
        if self.current.requests > 0 {
            self.close(utilization);
        }
    }

    pub fn observe(&mut self, obs: &Observation) {
        match obs.kind {
            ObservationKind::Hit => self.current.hits += 1,
            ObservationKind::Miss => self.current.misses += 1,
            ObservationKind::WriteSet => self.current.commits += 1,
            _ => {}
        }
        self.eviction.observe(obs);
        self.ttl.observe(obs);
    }

    pub fn record_eviction_event<'a, I>(&mut self, victims: &[String], residents: I, now: f64)
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        self.eviction.record_event(victims, residents, now);
    }

    pub fn sweep(&mut self, now: f64) {
        self.eviction.sweep(now);
        self.ttl.sweep(now);
    }

    /// Counts one client request; returns the window it closed, if any.
    pub fn end_request(&mut self, utilization: f64) -> Option<&WindowStats> {
        self.current.requests += 1;
        if self.current.requests >= self.window_size {
            self.close(utilization);
            self.closed.last()
        } else {
            None
        }
    }

    fn collect_finished(&mut self) {
        let c = self.eviction.take_finished();
        self.current.confusion.add(&c);
        let (sum, n) = self.ttl.take_finished();
        self.current.ttl_deviation_sum += sum;
        self.current.ttl_records += n;
    }

    fn close(&mut self, utilization: f64) {
        self.collect_finished();
        self.current.utilization = utilization;
        let next = WindowStats::empty(&self.phase, self.current.window_index + 1);
        let done = std::mem::replace(&mut self.current, next);
        self.totals.absorb(&done);
        self.closed.push(done);
    }

    pub fn live(&mut self, utilization: f64) -> LiveStats {
        self.collect_finished();
        let mut all = self.totals.clone();
        all.absorb(&self.current);
        all.utilization = utilization;
        let (precision, recall, f1) = all.precision_recall_f1();
        LiveStats {
            request_count: all.requests,
            hit_rate: all.hit_rate(),
            caching_rate: all.caching_rate(),
            precision,
            recall,
            f1,
            mean_ttl_deviation: all.mean_ttl_deviation(),
            utilization,
            window: self.current.clone(),
            windows_closed: self.closed.len(),
        }
    }
}
