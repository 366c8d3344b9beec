//! Run manifest: config echo, versions, per-stage timings, and the hashed
//! inventory of every emitted file. Timings live here (and only here) so
//! the data files themselves are byte-reproducible.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::CliResult;

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub package: String,
    pub version: String,
    pub generator: String,
    pub seed: u64,
    pub threads_env: Option<String>,
    pub config: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator: borneq_core::rng::GENERATOR_NAME.to_string(),
            seed,
            threads_env: std::env::var("RAYON_NUM_THREADS").ok(),
            config: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn config_kv(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn timing(&mut self, stage: &str, seconds: f64) {
        self.timings_ms
            .insert(stage.to_string(), seconds * 1000.0);
    }

    pub fn write(mut self, files: Vec<FileEntry>, dir: &Path) -> CliResult<()> {
        self.files = files;
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| crate::CliError::Io(e.to_string()))?;
        std::fs::write(dir.join("run_manifest.json"), json)?;
        Ok(())
    }
}
