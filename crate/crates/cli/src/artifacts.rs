use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use wmrft_core::io::{atomic_write, file_sha256};
use wmrft_core::{Error as CoreError, Result as CoreResult};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "wmrft";

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Written once, before any artifact of the run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub dataset_format: u16,
    pub checkpoint_format: u16,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_ms: u128,
    pub artifacts: BTreeMap<String, PathBuf>,
    /// Effective configuration after flag overrides, as TOML.
    pub config: String,
}

/// Written when the run ends successfully.
#[derive(Debug, Serialize)]
pub struct RunCompletion {
    pub finished_unix_ms: u128,
    pub sha256: BTreeMap<String, String>,
}

pub struct Run {
    manifest_path: PathBuf,
    artifacts: BTreeMap<String, PathBuf>,
}

impl Run {
    /// Writes `<primary><tag>.manifest.json` and returns a handle for
    /// completion. `tag` keeps manifests of resumed segments apart.
    pub fn start(
        command: &str,
        primary: &Path,
        tag: &str,
        artifacts: &[(&str, &Path)],
        cfg: &RunConfig,
        seed: u64,
        threads: usize,
    ) -> CliResult<Self> {
        let artifacts: BTreeMap<String, PathBuf> = artifacts
            .iter()
            .map(|(k, p)| (k.to_string(), p.to_path_buf()))
            .collect();
        let manifest = RunManifest {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            dataset_format: wmrft_core::toyworld::dataset::FORMAT_VERSION,
            checkpoint_format: wmrft_core::nn::checkpoint::FORMAT_VERSION,
            command: command.into(),
            seed,
            threads,
            started_unix_ms: unix_ms(),
            artifacts: artifacts.clone(),
            config: cfg.to_toml(),
        };
        let manifest_path = sibling(primary, &format!("{tag}.manifest.json"));
        write_json(&manifest_path, &manifest)?;
        Ok(Self {
            manifest_path,
            artifacts,
        })
    }

    pub fn finish(self) -> CliResult<()> {
        let mut sha256 = BTreeMap::new();
        for (name, path) in &self.artifacts {
            if path.exists() {
                sha256.insert(name.clone(), file_sha256(path)?);
            }
        }
        let done = RunCompletion {
            finished_unix_ms: unix_ms(),
            sha256,
        };
        write_json(&sibling(&self.manifest_path, ".done"), &done)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

/// JSON-lines log kept in memory and atomically rewritten on each flush.
pub struct MetricsLog {
    path: PathBuf,
    buf: String,
}

fn format_error(what: &str, e: serde_json::Error) -> CoreError {
    CoreError::Format(format!("{what}: {e}"))
}

impl MetricsLog {
    pub fn new(path: &Path) -> Self {
        Self {
            path: path.to_path_buf(),
            buf: String::new(),
        }
    }

    /// Continues an existing log, keeping only rows with `step < start_step`.
    pub fn resume(path: &Path, start_step: usize) -> CoreResult<Self> {
        let mut log = Self::new(path);
        if let Ok(text) = std::fs::read_to_string(path) {
            for line in text.lines() {
                let v: serde_json::Value = serde_json::from_str(line)
                    .map_err(|e| format_error(&format!("metrics row in {}", path.display()), e))?;
                if v["step"].as_u64().is_some_and(|s| (s as usize) < start_step) {
                    log.buf.push_str(line);
                    log.buf.push('\n');
                }
            }
        }
        Ok(log)
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> CoreResult<()> {
        let line = serde_json::to_string(row).map_err(|e| format_error("metrics row", e))?;
        self.buf.push_str(&line);
        self.buf.push('\n');
        Ok(())
    }

    pub fn flush(&self) -> CoreResult<()> {
        atomic_write(&self.path, self.buf.as_bytes())
    }
}
