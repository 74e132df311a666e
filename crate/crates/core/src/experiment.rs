//! Runs configured experiments: one manager per seed, every phase in order,
//! one CSV row per metrics window, and a JSON summary across seeds.
//!
//! The summary is written last, so a directory with CSV files but no
//! `summary.json` is a run that did not finish.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::manager::{derive_seed, streams, CacheManager, StrategyStats};
use crate::metrics::WindowStats;
use crate::workload::WorkloadGenerator;

pub const CSV_COLUMNS: [&str; 11] = [
    "run_id",
    "seed",
    "phase",
    "window_index",
    "hit_rate",
    "caching_rate",
    "precision",
    "recall",
    "f1",
    "mean_ttl_deviation",
    "utilization",
];

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

/// The metric columns, in CSV order.
pub const METRICS: [&str; 7] = [
    "hit_rate",
    "caching_rate",
    "precision",
    "recall",
    "f1",
    "mean_ttl_deviation",
    "utilization",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub run_id: String,
    pub seed: u64,
    pub phase: String,
    pub window_index: usize,
    pub hit_rate: f64,
    pub caching_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_ttl_deviation: f64,
    pub utilization: f64,
}

impl WindowRow {
    pub fn from_stats(run_id: &str, seed: u64, w: &WindowStats) -> Self {
        let (precision, recall, f1) = w.precision_recall_f1();
        Self {
            run_id: run_id.to_owned(),
            seed,
            phase: w.phase.clone(),
            window_index: w.window_index,
            hit_rate: w.hit_rate(),
            caching_rate: w.caching_rate(),
            precision,
            recall,
            f1,
            mean_ttl_deviation: w.mean_ttl_deviation(),
            utilization: w.utilization,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "hit_rate" => self.hit_rate,
            "caching_rate" => self.caching_rate,
            "precision" => self.precision,
            "recall" => self.recall,
            "f1" => self.f1,
            "mean_ttl_deviation" => self.mean_ttl_deviation,
            "utilization" => self.utilization,
            _ => return None,
        })
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub windows: Vec<WindowStats>,
    pub strategy_stats: StrategyStats,
    pub wall_time_secs: f64,
}

impl SeedRun {
    pub fn rows(&self, run_id: &str) -> Vec<WindowRow> {
        self.windows.iter().map(|w| WindowRow::from_stats(run_id, self.seed, w)).collect()
    }
}

pub fn run_id(config: &ExperimentConfig, seed: u64) -> String {
    format!("{}-s{seed}", config.name)
}

/// Builds the manager for `seed` and loads the backend.
pub fn prepare(config: &ExperimentConfig, seed: u64) -> Result<CacheManager> {
    let mut manager = CacheManager::new(config.manager_settings()?, seed)?;
    manager.load(&config.load_spec()?)?;
    Ok(manager)
}

/// Drives every phase through an already prepared manager.
pub fn drive(config: &ExperimentConfig, manager: &mut CacheManager, seed: u64) -> Result<()> {
    for (i, phase) in config.workload_phases()?.into_iter().enumerate() {
        manager.start_phase(&phase.name);
        let stream = derive_seed(seed, streams::WORKLOAD);
        let mut generator = WorkloadGenerator::new(phase, derive_seed(stream, i as u64), config.clock.ops_per_second)?;
        while let Some(op) = generator.next_operation() {
            manager.apply(&op)?;
        }
    }
    manager.flush();
    Ok(())
}

pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let started = Instant::now();
    let mut manager = prepare(config, seed)?;
    drive(config, &mut manager, seed)?;
    Ok(SeedRun {
        seed,
        windows: manager.ledger().windows().to_vec(),
        strategy_stats: manager.strategy_stats(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

pub fn csv_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("windows_seed{seed}.csv"))
}

pub fn write_csv(path: &Path, rows: &[WindowRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<WindowRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::InvalidArgument(format!(
            "{} has columns {header:?}, expected {CSV_COLUMNS:?}",
            path.display()
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub windows: usize,
    /// Across seeds, of each seed's mean over the phase's windows.
    pub metrics: BTreeMap<String, MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window_index: usize,
    pub phase: String,
    /// Across seeds.
    pub metrics: BTreeMap<String, MeanStd>,
}

/// How much seeds disagree early in a run compared with late.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedVariance {
    pub early_windows: usize,
    pub late_windows: usize,
    /// Mean over the first 10% of windows of the across-seed std.
    pub early_std: f64,
    /// Same over the last 10%.
    pub late_std: f64,
}

impl SeedVariance {
    pub fn early_exceeds_late(&self) -> bool {
        self.early_std > self.late_std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub config_hash: String,
    pub strategy: String,
    pub seeds: Vec<u64>,
    pub wall_time_secs: Option<f64>,
    pub phases: Vec<PhaseSummary>,
    pub windows: Vec<WindowSummary>,
    /// Hit-rate variance; present with two or more seeds.
    pub seed_variance: Option<SeedVariance>,
}

/// Across-seed hit-rate std, early windows against late ones.
pub fn seed_variance(runs: &[Vec<WindowRow>], metric: &str) -> Result<SeedVariance> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("seed variance needs at least two seeds".into()));
    }
    let n = runs.iter().map(Vec::len).min().unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidArgument("runs have no windows".into()));
    }
    let per_window: Vec<f64> = (0..n)
        .map(|i| {
            let values: Vec<f64> = runs.iter().map(|r| r[i].metric(metric).unwrap_or(0.0)).collect();
            MeanStd::of(&values).std
        })
        .collect();
    let k = n.div_ceil(10);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(SeedVariance {
        early_windows: k,
        late_windows: k,
        early_std: mean(&per_window[..k]),
        late_std: mean(&per_window[n - k..]),
    })
}

pub fn summarize(
    name: &str,
    config_hash: &str,
    strategy: &str,
    runs: &[(u64, Vec<WindowRow>)],
    wall_time_secs: Option<f64>,
) -> Result<RunSummary> {
    let mut phase_order: Vec<String> = Vec::new();
    for (_, rows) in runs {
        for r in rows {
            if !phase_order.contains(&r.phase) {
                phase_order.push(r.phase.clone());
            }
        }
    }
    let phases = phase_order
        .iter()
        .map(|phase| {
            let mut metrics = BTreeMap::new();
            let mut windows = 0;
            for m in METRICS {
                let per_seed: Vec<f64> = runs
                    .iter()
                    .filter_map(|(_, rows)| {
                        let v: Vec<f64> = rows.iter().filter(|r| &r.phase == phase).filter_map(|r| r.metric(m)).collect();
                        windows = windows.max(v.len());
                        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                    })
                    .collect();
                metrics.insert(m.to_owned(), MeanStd::of(&per_seed));
            }
            PhaseSummary {
                phase: phase.clone(),
                windows,
                metrics,
            }
        })
        .collect();
    let n = runs.iter().map(|(_, r)| r.len()).min().unwrap_or(0);
    let windows = (0..n)
        .map(|i| {
            let first = &runs[0].1[i];
            let metrics = METRICS
                .iter()
                .map(|m| {
                    let v: Vec<f64> = runs.iter().filter_map(|(_, r)| r[i].metric(m)).collect();
                    ((*m).to_owned(), MeanStd::of(&v))
                })
                .collect();
            WindowSummary {
                window_index: first.window_index,
                phase: first.phase.clone(),
                metrics,
            }
        })
        .collect();
    let rows: Vec<Vec<WindowRow>> = runs.iter().map(|(_, r)| r.clone()).collect();
    let variance = if runs.len() >= 2 && n > 0 {
        Some(seed_variance(&rows, "hit_rate")?)
    } else {
        None
    };
    Ok(RunSummary {
        name: name.to_owned(),
        config_hash: config_hash.to_owned(),
        strategy: strategy.to_owned(),
        seeds: runs.iter().map(|(s, _)| *s).collect(),
        wall_time_secs,
        phases,
        windows,
        seed_variance: variance,
    })
}

fn write_summary(out_dir: &Path, summary: &RunSummary) -> Result<()> {
    let tmp = out_dir.join(format!("{SUMMARY_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_vec_pretty(summary)?)?;
    fs::rename(tmp, out_dir.join(SUMMARY_FILE))?;
    Ok(())
}

/// Runs every seed, writing one CSV per seed, then the summary.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let _ = fs::remove_file(out_dir.join(SUMMARY_FILE));
    fs::write(out_dir.join(CONFIG_FILE), serde_json::to_vec_pretty(config)?)?;
    let started = Instant::now();
    let strategy = config.strategy_spec()?.to_string();
    let mut runs = Vec::new();
    for seed in config.seeds() {
        let run = run_seed(config, seed)?;
        let rows = run.rows(&run_id(config, seed));
        write_csv(&csv_path(out_dir, seed), &rows)?;
        runs.push((seed, rows));
    }
    let summary = summarize(
        &config.name,
        &config.hash(),
        &strategy,
        &runs,
        Some(started.elapsed().as_secs_f64()),
    )?;
    write_summary(out_dir, &summary)?;
    Ok(summary)
}

/// Runs `n_seeds` repetitions (seeds 1..=n) and reports their variance.
pub fn repeat_and_report(config: &ExperimentConfig, n_seeds: usize, out_dir: &Path) -> Result<RunSummary> {
    if n_seeds < 2 {
        return Err(Error::InvalidArgument("need at least two seeds to compare variance".into()));
    }
    let mut config = config.clone();
    config.seeds = Some((1..=n_seeds as u64).collect());
    config.repetitions = None;
    run_experiment(&config, out_dir)
}

/// Rebuilds `summary.json` from the CSV files in `out_dir`.
pub fn report(out_dir: &Path) -> Result<RunSummary> {
    let config = match fs::read_to_string(out_dir.join(CONFIG_FILE)) {
        Ok(text) => Some(ExperimentConfig::from_json(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let mut runs: Vec<(u64, Vec<WindowRow>)> = Vec::new();
    for entry in fs::read_dir(out_dir)? {
        let path = entry?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("windows_seed"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(seed) = seed {
            runs.push((seed, read_csv(&path)?));
        }
    }
    if runs.is_empty() {
        return Err(Error::NotFound(format!("no window CSV files in {}", out_dir.display())));
    }
    runs.sort_by_key(|(s, _)| *s);
    let (name, hash, strategy) = match &config {
        Some(c) => (c.name.clone(), c.hash(), c.strategy_spec()?.to_string()),
        None => ("unknown".to_owned(), String::new(), "unknown".to_owned()),
    };
    let summary = summarize(&name, &hash, &strategy, &runs, None)?;
    write_summary(out_dir, &summary)?;
    Ok(summary)
}
