//! Artifact writing: CSV tables and the run manifest, both atomic.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dqlm::io::{write_atomic, CsvTable};
use serde::Serialize;
use serde_json::{Map, Value};
use sha1::{Digest, Sha1};

use crate::fail::CliError;

/// SHA-1 of `"blob <len>\0" ++ bytes`, i.e. the id `git hash-object` prints.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub file: String,
    pub bytes: usize,
    pub rows: usize,
    pub sha1: String,
}

/// Output directory plus a record of every file written into it.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<(), CliError> {
        let text = table.render();
        write_atomic(&self.dir.join(name), text.as_bytes())?;
        self.files.push(FileRecord { file: name.into(), bytes: text.len(), rows: table.len(), sha1: git_blob_hash(text.as_bytes()) });
        Ok(())
    }
}

/// Wall-clock time per named stage.
#[derive(Debug)]
pub struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Map<String, Value>,
}

impl Stopwatch {
    pub fn start() -> Self {
        let now = Instant::now();
        Stopwatch { start: now, last: now, stages: Map::new() }
    }

    /// Closes the current stage under `name`.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.insert(format!("{name}_s"), Value::from((now - self.last).as_secs_f64()));
        self.last = now;
    }

    pub fn finish(mut self) -> Value {
        self.stages.insert("total_s".into(), Value::from(self.start.elapsed().as_secs_f64()));
        Value::Object(self.stages)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: &'a str,
    pub status: &'a str,
    pub config: Value,
    /// Hash of the compact canonical config JSON.
    pub config_hash: String,
    pub outputs: &'a [FileRecord],
    pub timings: Value,
    pub diagnostics: Value,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::new(crate::fail::Exit::Solver, "io", e.to_string()))?;
        text.push('\n');
        write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }
}
