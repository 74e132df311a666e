//! Time source for the cache manager.
//!
//! In virtual mode time is a pure function of how many operations have been
//! issued, which makes every run replayable. Wall mode reads a monotonic clock.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Virtual,
    Wall,
}

#[derive(Debug, Clone)]
pub struct Clock {
    mode: ClockMode,
    ops_per_second: f64,
    ops: u64,
    now: f64,
    started: Instant,
}

impl Clock {
    pub fn new(mode: ClockMode, ops_per_second: f64) -> Result<Self> {
        if !(ops_per_second > 0.0 && ops_per_second.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ops_per_second must be positive, got {ops_per_second}"
            )));
        }
        Ok(Self {
            mode,
            ops_per_second,
            ops: 0,
            now: 0.0,
            started: Instant::now(),
        })
    }

    pub fn virtual_clock(ops_per_second: f64) -> Result<Self> {
        Self::new(ClockMode::Virtual, ops_per_second)
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn ops_per_second(&self) -> f64 {
        self.ops_per_second
    }

    /// Timestamp of the most recent operation.
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Operations issued so far.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Starts the next operation and returns its timestamp. In virtual mode
    /// operation `i` (zero-based) happens at `i / ops_per_second`.
    pub fn tick(&mut self) -> f64 {
        let t = match self.mode {
            ClockMode::Virtual => self.ops as f64 / self.ops_per_second,
            ClockMode::Wall => self.started.elapsed().as_secs_f64(),
        };
        self.ops += 1;
        self.now = self.now.max(t);
        self.now
    }
}
