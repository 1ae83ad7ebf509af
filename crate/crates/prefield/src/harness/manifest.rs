//! Deterministic run manifest: configuration hash, per-replicate seeds and
//! artifact checksums. Identical config and seed produce a byte-identical
//! manifest (timings never enter it).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of(root: &Path, file: &Path) -> Result<Artifact> {
        let bytes = std::fs::read(file)?;
        let digest = Sha256::digest(&bytes);
        let rel = file
            .strip_prefix(root)
            .map_err(|_| Error::Config(format!("artifact {} outside run dir", file.display())))?;
        Ok(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: format!("{digest:x}"),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateEntry {
    pub index: usize,
    pub seed: u64,
    pub status: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config_sha256: String,
    pub seed_base: u64,
    pub replicates: Vec<ReplicateEntry>,
    pub aggregates: Vec<Artifact>,
}

impl Manifest {
    pub fn new<C: Serialize>(kind: &str, config: &C, seed_base: u64) -> Result<Manifest> {
        let canonical = serde_json::to_string(config)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(Manifest {
            kind: kind.to_string(),
            config_sha256: format!("{digest:x}"),
            seed_base,
            replicates: Vec::new(),
            aggregates: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
