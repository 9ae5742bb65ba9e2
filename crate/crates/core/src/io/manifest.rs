use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every result bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Derived from the command, the configuration and the input digests, so
    /// identical runs share an id.
    pub run_id: String,
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// Starts a manifest; `config` is the canonical configuration text.
    pub fn begin(command: &str, config: &str, seed: u64, inputs: &[&Path]) -> Result<Self> {
        let mut digests = Vec::with_capacity(inputs.len());
        for p in inputs {
            digests.push(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&std::fs::read(p)?),
            });
        }
        let config_digest = sha256_hex(config.as_bytes());
        let mut key = format!("{command}\n{config_digest}\n{seed}\n");
        for d in &digests {
            key.push_str(&d.sha256);
            key.push('\n');
        }
        Ok(Self {
            run_id: sha256_hex(key.as_bytes())[..16].to_string(),
            command: command.into(),
            config_digest,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: now_unix(),
            finished_unix: f64::NAN,
            inputs: digests,
            outputs: Vec::new(),
        })
    }

    pub fn finish(&mut self, outputs: Vec<String>) {
        self.finished_unix = now_unix();
        self.outputs = outputs;
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| crate::GmcError::ModelError(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
