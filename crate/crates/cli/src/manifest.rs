use std::path::Path;

use serde::{Deserialize, Serialize};

use appca::io::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>, started: String) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            started,
            finished: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(mut self, path: &Path, outputs: &[&str]) -> appca::Result<()> {
        self.finished = now();
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        let text = serde_json::to_string_pretty(&self)?;
        write_atomic(path, format!("{text}\n").as_bytes())
    }

    pub fn read(path: &Path) -> appca::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
