//! A bounded TTL cache whose admission, eviction and TTL decisions come from
//! either rule-based baselines or reinforcement-learning agents, plus the
//! workload generator, metrics and experiment harness used to compare them.

pub mod agents;
pub mod backend;
pub mod baselines;
pub mod cache;
pub mod clock;
pub mod config;
pub mod deadline;
pub mod error;
pub mod experiment;
pub mod http;
pub mod experience;
pub mod manager;
pub mod metrics;
pub mod observer;
pub mod workload;

pub use error::{Error, Result};
