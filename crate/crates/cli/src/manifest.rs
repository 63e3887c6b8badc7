//! Run manifest: what was produced, from which config, and whether the run
//! finished.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Waveform,
    Trace,
    Roc,
    Mse,
    Autocorr,
    Ambiguity,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Relative to the output directory.
    pub path: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub complete: bool,
    pub stages: Vec<String>,
    pub files: Vec<ManifestFile>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl ResultManifest {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        Self {
            run_id: format!("{}-{seed}", &config_hash[..12.min(config_hash.len())]),
            config_hash: config_hash.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: unix_now(),
            finished_unix: None,
            complete: false,
            stages: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Continues the manifest already in `dir` when it belongs to the same
    /// config and seed, so successive commands accumulate their files.
    pub fn open(dir: &Path, config_hash: &str, seed: u64) -> Self {
        match Self::read(dir) {
            Ok(mut m) if m.config_hash == config_hash && m.seed == seed => {
                m.complete = false;
                m.finished_unix = None;
                m.started_unix = unix_now();
                m
            }
            _ => Self::new(config_hash, seed),
        }
    }

    pub fn add(&mut self, path: &str, role: Role) {
        self.files.retain(|f| f.path != path);
        self.files.push(ManifestFile { path: path.to_string(), role });
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.files.iter().any(|f| f.role == role)
    }

    pub fn finish(&mut self) {
        self.complete = true;
        self.finished_unix = Some(unix_now());
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").map_err(|source| CliError::Write { path, source })
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read { path, source })?;
        Ok(serde_json::from_str(&text)?)
    }
}
