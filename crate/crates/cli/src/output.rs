//! Atomic file output and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Record of one run: what was asked, what was written, how long each stage took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub verb: String,
    pub version: String,
    pub conventions: Vec<String>,
    pub config: serde_json::Value,
    /// Stage name to wall time in seconds.
    pub timings: BTreeMap<String, f64>,
    /// Files written under the output directory, by name.
    pub outputs: Vec<String>,
    /// Scalar results worth keeping next to the tables.
    pub summary: BTreeMap<String, serde_json::Value>,
    pub status: String,
    pub error: Option<String>,
}

/// Writes files atomically into one directory and keeps the manifest in step.
pub struct OutputDir {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl OutputDir {
    pub fn new(dir: &Path, verb: &str, config: serde_json::Value) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                verb: verb.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                conventions: vec!["analyst-laplacian".into(), "scaled-green".into()],
                config,
                timings: BTreeMap::new(),
                outputs: Vec::new(),
                summary: BTreeMap::new(),
                status: "running".into(),
                error: None,
            },
        })
    }

    /// Writes `name` through a temporary file and a rename, then lists it.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), contents)?;
        if !self.manifest.outputs.iter().any(|n| n == name) {
            self.manifest.outputs.push(name.into());
        }
        Ok(())
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest.timings.insert(stage.into(), t.elapsed().as_secs_f64());
        out
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.manifest.summary.insert(key.into(), v);
    }

    /// Writes the manifest with the final status.
    pub fn finish(mut self, result: &Result<(), CliError>) -> Result<(), CliError> {
        match result {
            Ok(()) => self.manifest.status = "ok".into(),
            Err(e) => {
                self.manifest.status = "error".into();
                self.manifest.error = Some(e.to_string());
            }
        }
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST), &text)
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Formats rows of numbers as CSV under `header`.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
