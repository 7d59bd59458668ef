//! Artifact helpers. Tabular outputs stay pure CSV; the resolved
//! configuration that produced them is written next to each file as
//! `<name>.meta.json`, keeping every run replayable from its artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::errors::{CliError, CmdResult};

/// `foo.csv` -> `foo.csv.meta.json`.
pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".meta.json");
    artifact.with_file_name(name)
}

/// Writes the sidecar metadata JSON for an artifact.
pub fn write_meta(artifact: &Path, meta: &impl Serialize) -> CmdResult {
    write_json(&meta_path(artifact), meta)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("serializing {}: {e}", path.display())))?;
    body.push('\n');
    std::fs::write(path, body)
        .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}

/// Writes a CSV from a header and preformatted rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> CmdResult {
    let mut body = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    std::fs::write(path, body)
        .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}
