//! Run manifest: the artifact inventory, run parameters, timings and hashes
//! needed to re-run a pipeline bit-identically. Timestamps and timings live
//! only here; every other artifact is byte-reproducible from config + seed.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub package: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub created_unix_secs: u64,
    pub n_sites: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_dropped_rows: usize,
    pub duplicate_sites: bool,
    pub h_t: Option<f64>,
    pub psi_star: Option<usize>,
    pub variance_clamps: usize,
    pub artifacts: Vec<ArtifactEntry>,
    pub timings: Vec<StageTiming>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn artifact_entry(dir: &Path, name: &str) -> Result<ArtifactEntry, CliError> {
    let path = dir.join(name);
    let bytes =
        std::fs::read(&path).map_err(|e| CliError::Io(format!("hash {name}: {e}")))?;
    Ok(ArtifactEntry {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}
