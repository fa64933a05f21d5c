//! Run manifests: every CLI invocation logs its config hash and input
//! digests so identical inputs are recognizably identical runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl RunManifest {
    /// `config` is the canonical serialized configuration of the run
    /// (config file bytes or rendered CLI arguments).
    pub fn new(command: &str, config: &[u8], inputs: &[&Path]) -> Result<Self> {
        let mut input_digests = BTreeMap::new();
        for p in inputs {
            input_digests.insert(p.display().to_string(), digest_file(p)?);
        }
        Ok(RunManifest {
            command: command.to_string(),
            config_hash: sha256_hex(config),
            input_digests,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}
