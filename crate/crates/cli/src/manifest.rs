//! Run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use uavgrid_core::rng::content_hash;

use crate::CliError;

/// Written before any result; `config_sha256` is the hash of the exact
/// `config.json` bytes in the same directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub config_sha256: String,
    pub output_dir: PathBuf,
    pub version: String,
    pub started_unix_s: u64,
    pub finished_unix_s: Option<u64>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Creates `dir`, refusing a non-empty one unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(CliError::Input(format!(
                "output directory {} is not empty; pass --force to reuse it",
                dir.display()
            ))
            .into());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub struct Run {
    pub dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    /// Writes `config.json` and the manifest, in that order.
    pub fn start<T: Serialize>(
        command: &str,
        argv: Vec<String>,
        config_path: Option<PathBuf>,
        seed: u64,
        config: &T,
        dir: &Path,
        force: bool,
    ) -> Result<Self> {
        prepare_dir(dir, force)?;
        let bytes = serde_json::to_string_pretty(config)?;
        fs::write(dir.join("config.json"), &bytes)?;
        let manifest = RunManifest {
            command: command.to_string(),
            argv,
            config_path,
            seed,
            config_sha256: content_hash(bytes.as_bytes()),
            output_dir: dir.to_path_buf(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: now(),
            finished_unix_s: None,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.finished_unix_s = Some(now());
        write_json(&self.dir.join("manifest.json"), &self.manifest)
    }
}

pub fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())).into())
}
