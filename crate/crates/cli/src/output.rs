use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, params: Value, seed: Option<u64>) -> Self {
        Self { command: command.into(), params, seed, version: env!("CARGO_PKG_VERSION").into() }
    }

    /// One-line form embedded in output files; carries no timestamp so reruns are byte-identical.
    pub fn header(&self) -> String {
        format!("# epp {}", serde_json::to_string(self).expect("manifest serializes"))
    }

    /// Writes `<file>.manifest.json` next to an output, with a timestamp and any extra results.
    pub fn write_sidecar(&self, output: &Path, extra: Value) -> Result<PathBuf> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut v = serde_json::to_value(self)?;
        v["timestamp_unix"] = json!(secs);
        v["output"] = json!(output.display().to_string());
        if !extra.is_null() {
            v["results"] = extra;
        }
        let path = PathBuf::from(format!("{}.manifest.json", output.display()));
        fs::write(&path, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, manifest: &RunManifest, extra_comments: &[String], header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut s = manifest.header();
    s.push('\n');
    for c in extra_comments {
        s.push_str("# ");
        s.push_str(c);
        s.push('\n');
    }
    s.push_str(&header.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}
