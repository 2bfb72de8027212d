//! Runner for the documented examples.
//!
//! Every sub-directory with a `config.toml` is one example; the file's
//! `command` key names the subcommand.

use std::fmt::Write as _;
use std::path::Path;

use crate::commands::Summary;
use crate::{load_config, run_config, CliError};

#[derive(Debug)]
pub struct ExampleRow {
    pub name: String,
    pub command: String,
    pub summary: Summary,
    pub error: Option<(String, String)>,
}

pub fn run_all(dir: &Path, out: &Path, smoke: bool, deterministic: bool) -> Result<Vec<ExampleRow>, CliError> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("config.toml").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut rows = vec![];
    for name in names {
        let path = dir.join(&name).join("config.toml");
        let mut row = ExampleRow { name: name.clone(), command: String::new(), summary: Summary::new(), error: None };
        let result = load_config(&path).and_then(|cfg| {
            row.command = cfg.command.clone().ok_or_else(|| CliError::Config("example config lacks `command`".into()))?;
            run_config(&row.command, &cfg, &out.join(&name), deterministic, smoke)
        });
        match result {
            Ok((summary, _)) => row.summary = summary,
            Err(e) => row.error = Some((e.name().into(), e.to_string())),
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn format_table(rows: &[ExampleRow]) -> String {
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(7);
    let mut s = format!("{:<w$}  {:<16}  {:<6}  details\n", "example", "command", "status");
    for r in rows {
        let (status, details) = match &r.error {
            None => ("ok", r.summary.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")),
            Some((name, msg)) => ("FAILED", format!("error[{name}]: {msg}")),
        };
        writeln!(s, "{:<w$}  {:<16}  {:<6}  {details}", r.name, r.command, status).ok();
    }
    s
}
