use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{sha256_file, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance of one command run, written next to its outputs.
///
/// Outputs are listed by file name with their SHA-256, so every artifact in
/// the directory is traceable to the run that wrote it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        RunManifest {
            command: command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: BTreeMap::new(),
            created_unix: 0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn time(&mut self, phase: &str, seconds: f64) {
        self.timings.insert(phase.to_owned(), seconds);
    }

    /// Digest every named output in `dir` and write the manifest there.
    pub fn write(mut self, dir: &Path, outputs: &[&str]) -> Result<()> {
        for name in outputs {
            self.outputs.insert((*name).to_owned(), sha256_file(&dir.join(name))?);
        }
        self.created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        write_json(&dir.join(MANIFEST_FILE), &self)
    }
}
