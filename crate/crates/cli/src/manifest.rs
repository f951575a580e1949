//! Run manifests: enough metadata to reproduce every output byte-for-byte.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub seed: u64,
    pub artifact_version: String,
    pub outputs: Vec<String>,
    pub wall_time_ms: f64,
    pub config: serde_json::Value,
}

pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl RunManifest {
    pub fn new(
        config: &impl Serialize,
        seed: u64,
        outputs: Vec<String>,
        wall_time_ms: f64,
    ) -> Result<Self> {
        Ok(Self {
            config_hash: config_hash(config)?,
            seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
            wall_time_ms,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
