//! `hexperc`: batch front end for the census, matrix, bound, Monte Carlo and
//! decomposition stages. CSV on stdout by default, JSON with `--format json`,
//! and a run manifest on stderr (or `--manifest FILE`).

mod commands;
mod config;
mod error;
mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::{unix_now, RunManifest, MANIFEST_SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "hexperc", version, about = "Cluster-decomposition bound on the honeycomb site-percolation threshold")]
struct Cli {
    /// key=value file merged under the command-line flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Cap on worker threads; output does not depend on it
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the run manifest here instead of stderr
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CacheArgs {
    /// Census cache directory (default: $HEXPERC_CACHE, then ~/.cache/hexperc)
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// Always recompute the census
    #[arg(long, conflicts_with = "cache")]
    pub no_cache: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CensusArgs {
    /// Largest cluster size to enumerate
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_size: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub cache: CacheArgs,
    /// Stop after this many clusters; bypasses the cache
    #[arg(long)]
    pub budget: Option<u64>,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MatrixArgs {
    /// Cross-check against borders of all clusters up to this size
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    pub verify_empirical: Option<u64>,
    /// Check a 12x12 CSV matrix instead of the built-in one
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundArgs {
    /// Concentration grid start:stop:step
    #[arg(long, value_name = "SPEC", required_unless_present = "threshold_only", conflicts_with = "threshold_only")]
    pub c_grid: Option<String>,
    /// Print only the eigenvalue and the threshold bound
    #[arg(long)]
    pub threshold_only: bool,
    /// Constant in the border-count bound
    #[arg(long = "C", default_value_t = 1.0)]
    #[serde(rename = "C")]
    pub c_constant: f64,
    /// Sum the series up to this border length instead of the closed form
    #[arg(long, value_name = "N")]
    pub truncation: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct McArgs {
    /// Concentration, or a grid start:stop:step
    #[arg(long)]
    pub c: String,
    /// Window half-width
    #[arg(long = "L", default_value_t = 16)]
    #[serde(rename = "L")]
    pub l: u32,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Origin-cluster size histogram up to this size instead of the one-arm estimate
    #[arg(long, value_name = "K")]
    pub histogram: Option<usize>,
    /// Save replicate 0 of the first concentration as a configuration document
    #[arg(long, value_name = "FILE")]
    pub save_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DecomposeArgs {
    #[arg(long)]
    pub c: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_size: u64,
    #[arg(long, default_value = "exact", value_parser = ["exact", "paper"])]
    pub mode: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "command")]
pub enum Command {
    /// Enumerate clusters and tally their external borders
    Census(CensusArgs),
    /// Print the way-connection matrix and its structure checks
    Matrix(MatrixArgs),
    /// Threshold bound and the non-percolation lower bound over a grid
    Bound(BoundArgs),
    /// Monte Carlo one-arm probability or origin-cluster histogram
    Mc(McArgs),
    /// Partial sums of the cluster decomposition
    Decompose(DecomposeArgs),
}

fn parse_args(raw: &[String]) -> Result<(Cli, BTreeMap<String, String>), ExitCode> {
    let config = match config::config_path(raw).map(|p| config::load(p.as_ref())).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("{e}");
            return Err(ExitCode::from(e.exit_code() as u8));
        }
    };
    let merged = config::merge(raw, &config);
    match Cli::try_parse_from(&merged) {
        Ok(cli) => Ok((cli, config)),
        Err(e) => {
            let _ = e.print();
            Err(ExitCode::from(if e.use_stderr() { 2 } else { 0 }))
        }
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let started_unix = unix_now();
    let raw: Vec<String> = std::env::args().collect();
    let (cli, config) = match parse_args(&raw) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let threads = cli.threads.map(|n| n as usize);
    let ctx = commands::Context { format: cli.format };
    let command = cli.command.clone();
    let result = hexperc::with_threads(threads, move || commands::run(&command, &ctx));

    let (out, err) = match result {
        Ok(out) => {
            let err = out.failure.clone();
            (Some(out), err)
        }
        Err(e) => (None, Some(e)),
    };
    let code = err.as_ref().map_or(0, CliError::exit_code);
    if let Some(out) = &out {
        print!("{}", out.stdout);
        for note in &out.notes {
            eprintln!("{note}");
        }
    }
    if let Some(e) = &err {
        eprintln!("{e}");
    }

    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA,
        artifact_version: env!("CARGO_PKG_VERSION"),
        command_line: raw,
        config_file: cli.config.clone(),
        config,
        resolved: serde_json::to_value(&cli.command).unwrap_or_default(),
        threads,
        seed: out.as_ref().and_then(|o| o.seed),
        census_cache: out.as_ref().map(|o| o.caches.clone()).unwrap_or_default(),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
    };
    let dest = cli.manifest.clone().or_else(|| out.as_ref().and_then(|o| o.manifest_hint.clone()));
    match dest {
        Some(path) => {
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            if let Err(e) = std::fs::write(&path, json + "\n") {
                eprintln!("error: writing manifest {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => eprintln!("{}", serde_json::to_string(&manifest).expect("manifest serializes")),
    }
    ExitCode::from(code as u8)
}
