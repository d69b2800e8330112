use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use hexperc::census::CacheOutcome;
use serde::Serialize;

pub const MANIFEST_SCHEMA: &str = "hexperc-manifest/1";

#[derive(Debug, Clone, Serialize)]
pub struct CacheRecord {
    pub k: usize,
    #[serde(flatten)]
    pub outcome: CacheOutcome,
}

/// Everything needed to replay a run: the resolved arguments reproduce the
/// primary output byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: &'static str,
    pub artifact_version: &'static str,
    pub command_line: Vec<String>,
    pub config_file: Option<PathBuf>,
    pub config: BTreeMap<String, String>,
    /// Subcommand arguments after merging defaults, config and flags.
    pub resolved: serde_json::Value,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub census_cache: Vec<CacheRecord>,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}
