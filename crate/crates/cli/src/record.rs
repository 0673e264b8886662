//! Run records and the append-only run store.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Xi,
    Disconnect,
    Census,
    Frontier,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Command::Xi => "xi",
            Command::Disconnect => "disconnect",
            Command::Census => "census",
            Command::Frontier => "frontier",
        };
        f.write_str(s)
    }
}

/// Discretization actually used, for convergence sweeps across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub step_scale: Option<f64>,
    pub cell_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub timestamp: String,
    pub command: Command,
    pub version: String,
    pub master_seed: u64,
    pub config: Config,
    pub resolution: Resolution,
    pub elapsed_s: f64,
    pub results: Value,
}

impl RunRecord {
    pub fn new(command: Command, config: &Config, resolution: Resolution, results: Value, elapsed_s: f64) -> Result<Self> {
        let now = chrono::Utc::now();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(config)?);
        h.update(now.timestamp_nanos_opt().unwrap_or_default().to_le_bytes());
        let digest = h.finalize();
        let tag: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            run_id: format!("{command}-{}-{tag}", now.format("%Y%m%dT%H%M%S")),
            timestamp: now.to_rfc3339(),
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.seed,
            config: config.clone(),
            resolution,
            elapsed_s,
            results,
        })
    }

    /// Canonical text of the results payload, the unit of replay comparison.
    pub fn results_text(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.results)?)
    }
}

/// `DIR/runs/<run_id>.{json,csv,svg}`.
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn new(out: &Path) -> Self {
        Self { dir: out.join("runs") }
    }

    pub fn path(&self, run_id: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{run_id}.{ext}"))
    }

    fn ensure(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))
    }

    /// Write a record without overwriting an existing one.
    pub fn save(&self, record: &RunRecord) -> Result<PathBuf> {
        self.ensure()?;
        let path = self.path(&record.run_id, "json");
        if path.exists() {
            return Err(CliError::Config(format!("run {} already stored", record.run_id)));
        }
        let text = serde_json::to_string_pretty(record)?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn save_extra(&self, run_id: &str, ext: &str, content: &[u8]) -> Result<PathBuf> {
        self.ensure()?;
        let path = self.path(run_id, ext);
        std::fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn load(&self, run_id: &str) -> Result<RunRecord> {
        let path = self.path(run_id, "json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
