//! Reproducibility record written next to every experiment's artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::io::{sha256_file, write_string, GeneratorMeta};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeed {
    pub method: String,
    /// Absolute stepsize, when the method uses one.
    pub stepsize: Option<f64>,
    pub seed_index: u64,
    pub master: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifestStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub software: String,
    pub version: String,
    pub status: ManifestStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorMeta>,
    pub runs: Vec<RunSeed>,
    pub artifacts: Vec<Artifact>,
    pub wall_time_secs: f64,
}

impl ExperimentManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: ManifestStatus::Complete,
            error: None,
            config: config.clone(),
            generator: None,
            runs: Vec::new(),
            artifacts: Vec::new(),
            wall_time_secs: 0.0,
        }
    }

    /// Hashes `path` (which must lie under `out_dir`) and lists it.
    pub fn add_artifact(&mut self, out_dir: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(out_dir).unwrap_or(path).to_path_buf();
        let bytes = std::fs::metadata(path).map_err(|e| BenchError::io(path, e))?.len();
        self.artifacts.push(Artifact { path: rel, sha256: sha256_file(path)?, bytes });
        Ok(())
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == Path::new(name))
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        write_string(&path, &serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
