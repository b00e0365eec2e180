//! CSV tables and the run manifest they point back to.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// What a run was asked to do. Everything here feeds the manifest hash, so
/// it must not contain timestamps, paths or the worker count.
#[derive(Debug, Serialize)]
pub struct RunIdentity {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub scenario: Value,
    pub parameters: Value,
    pub overhead_factor: f64,
}

impl RunIdentity {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("identity serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// A table whose rows all end with the manifest hash.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    hash: String,
}

impl Table {
    pub fn new(header: &[&str], hash: String) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let mut full: Vec<&str> = header.to_vec();
        full.push("manifest");
        writer.write_record(&full).expect("in-memory write");
        Table { writer, hash }
    }

    pub fn row(&mut self, fields: &[String]) {
        let mut full = fields.to_vec();
        full.push(self.hash.clone());
        self.writer.write_record(&full).expect("in-memory write");
    }

    /// Writes the table (to `out` or stdout) and, with `out`, the manifest.
    pub fn finish(self, out: Option<&Path>, identity: &RunIdentity, workers: usize) -> io::Result<()> {
        let bytes = self.writer.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        match out {
            Some(path) => {
                fs::write(path, &bytes)?;
                let manifest_file = manifest_path(path);
                let manifest = json!({
                    "hash": self.hash,
                    "identity": identity,
                    "timestamp": chrono::Utc::now().to_rfc3339(),
                    "workers": workers,
                    "outputs": [path.display().to_string(), manifest_file.display().to_string()],
                });
                let mut text = serde_json::to_string_pretty(&manifest)?;
                text.push('\n');
                fs::write(manifest_file, text)?;
            }
            None => io::stdout().lock().write_all(&bytes)?,
        }
        Ok(())
    }
}

/// Shortest round-trip decimal; empty for a missing value.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}
