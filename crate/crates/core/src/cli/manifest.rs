use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One run appended to an output directory's manifest. A manifest entry is
/// enough to reproduce the run: command, full config snapshot and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub tool_version: String,
    pub duration_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Append an entry to `<out_dir>/manifest.json`, creating it on first use.
/// Each output directory has exactly one manifest holding its full history.
pub fn append_manifest(out_dir: &Path, entry: ManifestEntry) -> Result<PathBuf> {
    let path = out_dir.join(MANIFEST_FILE);
    let mut entries: Vec<ManifestEntry> = if path.exists() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.display().to_string(),
            detail: format!("manifest JSON: {e}"),
        })?
    } else {
        Vec::new()
    };
    entries.push(entry);
    let text = serde_json::to_string_pretty(&entries)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

pub fn read_manifest(out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = out_dir.join(MANIFEST_FILE);
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: path.display().to_string(),
        detail: format!("manifest JSON: {e}"),
    })
}
