use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorRecord {
    pub class: String,
    pub message: String,
}

/// Record of one command run, written as `manifest.json` in the output directory.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: String,
    pub error: Option<ErrorRecord>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: "altruist".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: "running".into(),
            error: None,
            config: config.entries().clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
            details: serde_json::Map::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: format!("{:x}", Sha256::digest(&bytes)) });
        Ok(bytes)
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn time<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let r = f();
        *self.timings_ms.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        r
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn fail(&mut self, err: &CliError) {
        self.status = "error".into();
        self.error = Some(ErrorRecord { class: err.class().into(), message: err.to_string() });
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, CliError> {
        if self.error.is_none() {
            self.status = "ok".into();
        }
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        altruist::io::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
