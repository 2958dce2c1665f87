use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Run record written once per output directory when a command finishes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<PathBuf>,
    /// Command-specific results (timings, counts).
    pub results: Value,
}

impl RunManifest {
    pub fn start(command: &str, config: Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config,
            seed,
            version: concat!("kstrip ", env!("CARGO_PKG_VERSION")).into(),
            started: now(),
            finished: String::new(),
            artifacts: Vec::new(),
            results: Value::Null,
        }
    }

    /// Stamp the end time and write `dir/manifest.json` atomically.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished = now();
        let path = dir.join(MANIFEST_NAME);
        let tmp = dir.join(format!(".{MANIFEST_NAME}.tmp"));
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
