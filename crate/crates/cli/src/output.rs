//! Run-directory output: full-precision CSV, JSON reports, and the manifest
//! accounting for every file with checksums.

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Formats a float with 17 significant digits (round-trip exact for f64).
pub fn full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Collects output files and writes the manifest at the end of a run.
pub struct RunDir {
    pub dir: PathBuf,
    files: Vec<FileEntry>,
    started_unix_ms: u128,
    command: String,
    config_sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: &'a str,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    files: &'a [FileEntry],
    diagnostics: &'a serde_json::Value,
}

impl RunDir {
    pub fn create(dir: &Path, command: &str, config_json: &str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(config_json.as_bytes());
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH)?.as_millis(),
            command: command.to_string(),
            config_sha256: hex::encode(hasher.finalize()),
        })
    }

    /// Writes bytes and records the file in the inventory.
    pub fn write_file(&mut self, name: &str, contents: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let mut f = std::fs::File::create(&path).with_context(|| format!("creating {name}"))?;
        f.write_all(contents)?;
        f.flush()?;
        let mut hasher = Sha256::new();
        hasher.update(contents);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: hex::encode(hasher.finalize()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_file(name, text.as_bytes())
    }

    /// Writes the manifest (atomically: temp file plus rename) and consumes
    /// the run directory handle.
    pub fn finish(self, diagnostics: serde_json::Value) -> anyhow::Result<()> {
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: &self.config_sha256,
            started_unix_ms: self.started_unix_ms,
            finished_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH)?.as_millis(),
            files: &self.files,
            diagnostics: &diagnostics,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let tmp = self.dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, text.as_bytes())?;
        std::fs::rename(&tmp, self.dir.join("manifest.json"))?;
        Ok(())
    }
}

/// Builds a CSV document from a header and full-precision rows.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { buf: header.join(",") + "\n" }
    }

    pub fn row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.buf.push(',');
            }
            self.buf.push_str(&full(*v));
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
