//! Reproducibility manifest: the exact effective configuration, hashed, plus
//! tool versions. A rerun with the same manifest produces byte-identical
//! outputs.

use crate::config::RunConfig;
use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub deltas: Vec<f64>,
    pub version: String,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `manifest.json` into `dir`. When a manifest from a previous run is
/// present, reports whether the configuration hash matches (a matching hash
/// means the rerun will reproduce the outputs byte for byte).
pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Manifest> {
    let manifest = Manifest {
        command: command.to_string(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        seeds: cfg.seeds.clone(),
        deltas: cfg.deltas.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = dir.join("manifest.json");
    if let Ok(existing) = std::fs::read_to_string(&path) {
        match serde_json::from_str::<Manifest>(&existing) {
            Ok(prev) if prev.config_hash == manifest.config_hash => {
                println!("manifest: config hash matches the previous run (replay)");
            }
            Ok(_) => println!("manifest: configuration changed since the previous run"),
            Err(_) => println!("manifest: previous manifest unreadable, overwriting"),
        }
    }
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
