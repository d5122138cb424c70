use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Everything needed to re-run a command bit-identically. `wall_time_s` is
/// informational and the only field that differs between re-runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub datasets: Vec<String>,
    pub seeds: Vec<u64>,
    pub params: Value,
    pub tool_version: String,
    pub parallel: bool,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

pub struct Recorder {
    started: Instant,
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn start(command: &str, argv: &[String], out_dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Failure::usage(format!("{}: {e}", out_dir.display())))?;
        Ok(Self {
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                argv: argv.to_vec(),
                datasets: Vec::new(),
                seeds: Vec::new(),
                params: Value::Null,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                parallel: cogol_core::par::is_parallel(),
                wall_time_s: 0.0,
                outputs: Vec::new(),
            },
        })
    }

    pub fn dataset(&mut self, path: &Path) {
        self.manifest.datasets.push(path.display().to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn params(&mut self, params: Value) {
        self.manifest.params = params;
    }

    /// Write `contents` to `<out>/<name>` and list it in the manifest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::internal(format!("{}: {e}", path.display())))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(path)
    }

    /// Record a file written by someone else.
    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn finish(mut self) -> Result<PathBuf, Failure> {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        let path = self.out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Failure::internal(e.to_string()))?;
        fs::write(&path, text + "\n")
            .map_err(|e| Failure::internal(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
