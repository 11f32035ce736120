//! Result files: CSV tables and their JSON sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

use super::config::ExperimentConfig;

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Path of the JSON sidecar for `csv_path`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
pub struct RunMetadata<'a> {
    pub experiment: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub n_drops: usize,
    pub n_fading_realizations: usize,
    pub wall_time_s: f64,
    pub rows: usize,
    pub config: &'a ExperimentConfig,
}

pub fn write_sidecar(csv_path: &Path, meta: &RunMetadata<'_>) -> Result<PathBuf> {
    let path = sidecar_path(csv_path);
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}
