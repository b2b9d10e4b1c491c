use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one pipeline run. Timings are wall-clock and the only field
/// that differs between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub status: RunStatus,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// True when the run aborted and the listed artifacts are incomplete.
    pub partial: bool,
    /// Sorted by path.
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seed,
            status: RunStatus::Success,
            failed_stage: None,
            error: None,
            partial: false,
            artifacts: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds,
        });
    }

    pub fn fail(&mut self, stage: &str, err: &CliError) {
        self.status = RunStatus::Failed;
        self.failed_stage = Some(stage.to_string());
        self.error = Some(err.to_string());
        self.partial = true;
    }

    /// Hashes every file in `paths` that exists; a path listed twice is
    /// recorded once.
    pub fn record(&mut self, root: &Path, paths: &[PathBuf]) -> CliResult<()> {
        for p in paths {
            if !p.exists() {
                continue;
            }
            let rel = p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/");
            let (sha256, bytes) = file_digest(p)?;
            self.artifacts.retain(|a| a.path != rel);
            self.artifacts.push(Artifact { path: rel, sha256, bytes });
        }
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(())
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest always serializes");
        std::fs::write(path, text).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::stage("manifest")(e.into()))
    }
}

/// Hex SHA-256 and size of a file.
pub fn file_digest(path: &Path) -> CliResult<(String, u64)> {
    let mut file = std::fs::File::open(path).map_err(CliError::io(path))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(CliError::io(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok((format!("{:x}", hasher.finalize()), bytes))
}
