pub mod ablate;
pub mod analyze;
pub mod eval;
pub mod features;
pub mod gender;
pub mod pairs;
pub mod ssa;
pub mod subset;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::ConfigMap;

/// Resolves the output directory (flag, config key "out-dir", default "out")
/// and makes sure it exists.
pub fn out_dir(flag: Option<PathBuf>, cfg: &ConfigMap) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.path("out-dir"))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

/// Pretty-prints a serializable value to a file, atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    orgmail_core::ingest::atomic_write(path, json.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
