//! Result files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use topolab::state_derivative::SplitField;

use crate::CliError;

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    artifact_version: &'a str,
    command: &'a str,
    config_hash: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    started: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finished: Option<String>,
    files: Vec<FileEntry>,
}

/// Writes files into one directory and records their digests.
pub struct Output {
    dir: PathBuf,
    command: String,
    config_hash: String,
    started: Option<String>,
    files: Vec<FileEntry>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl Output {
    /// Timestamps are left out when `deterministic` is set so that reruns
    /// reproduce the manifest byte for byte.
    pub fn create(dir: &Path, command: &str, config_hash: &str, deterministic: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            config_hash: config_hash.into(),
            started: (!deterministic).then(now),
            files: vec![],
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(FileEntry {
            path: name.into(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes `manifest.json` and returns the list of produced files.
    pub fn finish(self) -> Result<Vec<String>, CliError> {
        let finished = self.started.as_ref().map(|_| now());
        let mut names: Vec<String> = self.files.iter().map(|f| f.path.clone()).collect();
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config_hash: &self.config_hash,
            started: self.started.clone(),
            finished,
            files: self.files,
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        fs::write(self.dir.join("manifest.json"), s)?;
        names.push("manifest.json".into());
        Ok(names)
    }
}

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any f64.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV of a split field at the vertices: regular part, singular part and
/// their sum. The singular part is reported as zero at its own centre.
pub fn split_field_csv(f: &SplitField) -> String {
    let mut s = String::from("x,y,regular,singular,value\n");
    for (p, r) in f.regular.mesh().vertices().iter().zip(f.regular.values()) {
        let g = f.singular.value(*p);
        writeln!(s, "{},{},{},{},{}", num(p[0]), num(p[1]), num(*r), num(g), num(r + g)).ok();
    }
    s
}

pub fn table_csv(header: &str, rows: &[Vec<f64>]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| num(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
