//! Library side of the experiment runner: configuration schema, scenario
//! implementations, and the run manifest. The binary in `main.rs` is a
//! thin argument-parsing layer over these.

pub mod config;
pub mod scenarios;

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Provenance record written next to every run's outputs. The timestamp
/// is the only non-deterministic field; CSV bodies are byte-stable.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub timestamp_unix: u64,
    pub pass: bool,
}

impl RunManifest {
    pub fn new(scenario: &str, config_bytes: &[u8], seed: u64, pass: bool) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        let digest = hasher.finalize();
        let mut versions = BTreeMap::new();
        versions.insert(
            "meanfield-lab".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        RunManifest {
            scenario: scenario.to_string(),
            config_sha256: hex_string(&digest),
            seed,
            versions,
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            pass,
        }
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hash_is_stable() {
        let a = RunManifest::new("dobrushin", b"{}", 7, true);
        let b = RunManifest::new("dobrushin", b"{}", 7, true);
        assert_eq!(a.config_sha256, b.config_sha256);
        assert_eq!(a.config_sha256.len(), 64);
    }
}
