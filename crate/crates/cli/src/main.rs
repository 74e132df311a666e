use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rlcache::config::ExperimentConfig;
use rlcache::experiment;

/// Output directory used when neither `--out`, the config, nor the environment names one.
const DEFAULT_OUT: &str = "results";
const OUT_ENV: &str = "RLCACHE_OUT";

#[derive(Debug, Parser)]
#[command(name = "rlcache", version, about = "Learned cache management experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write per-window CSVs plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds, overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Multiplier on every phase length.
        #[arg(long)]
        scale: Option<f64>,
        /// Defaults to the config's output_dir, then $RLCACHE_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the key-value facade over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Seed for the backend and the agents.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Rebuild the summary from the CSVs in an output directory.
    Report {
        #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seeds,
            scale,
            out,
        } => {
            let mut config = load(&config)?;
            if let Some(seeds) = seeds {
                config.repetitions = None;
                config.seeds = Some(seeds);
            }
            if let Some(scale) = scale {
                config.scale = scale;
            }
            let out = out
                .or_else(|| config.output_dir.clone())
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let summary = experiment::run_experiment(&config, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            eprintln!("results written to {}", out.display());
        }
        Command::Serve { config, bind, seed } => {
            let config = load(&config)?;
            let manager = experiment::prepare(&config, seed)?;
            eprintln!("serving on {bind}");
            rlcache::http::serve(manager, &bind)?;
        }
        Command::Report { out } => {
            let summary = experiment::report(&out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}
