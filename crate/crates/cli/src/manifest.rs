//! Run manifest written next to every set of outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    arguments: Vec<String>,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects inputs and outputs of one command run.
pub struct Run {
    command: &'static str,
    started: Instant,
    out_dir: PathBuf,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

impl Run {
    pub fn start(command: &'static str, out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self { command, started: Instant::now(), out_dir: out_dir.to_path_buf(), inputs: vec![], outputs: vec![] })
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(FileEntry { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        String::from_utf8(bytes).map_err(|_| CliError::input(format!("{} is not UTF-8 text", path.display())))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(FileEntry { path: path.display().to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(path)
    }

    /// Writes `<stem>.manifest.json`; the wall time is its only volatile field.
    pub fn finish(self, stem: &str) -> Result<(), CliError> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            arguments: std::env::args().skip(1).collect(),
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::input(e.to_string()))?;
        let path = self.out_dir.join(format!("{stem}.manifest.json"));
        fs::write(&path, text + "\n").map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    }
}
