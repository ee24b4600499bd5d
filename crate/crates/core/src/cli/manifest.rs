// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::channel::hex_digest;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run, sufficient to re-execute it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Subcommand that produced the run (`train`, `eval`, `sweep`).
    pub command: String,
    pub argv: Vec<String>,
    pub config: ExperimentConfig,
    pub dataset_path: PathBuf,
    pub dataset_hash: String,
    /// Checkpoint consumed by `eval`.
    pub input_checkpoint: Option<PathBuf>,
    /// Output files relative to the run directory, by kind.
    pub checkpoints: Vec<PathBuf>,
    pub traces: Vec<PathBuf>,
    pub reports: Vec<PathBuf>,
    /// SHA-256 of every output file, keyed by relative path.
    pub artifact_hashes: BTreeMap<String, String>,
    pub beta_star: Option<f64>,
    pub beta_star_nmse_db: Option<f64>,
    pub duration_secs: f64,
    pub complete: bool,
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, config: ExperimentConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv,
            config,
            dataset_path: PathBuf::new(),
            dataset_hash: String::new(),
            input_checkpoint: None,
            checkpoints: Vec::new(),
            traces: Vec::new(),
            reports: Vec::new(),
            artifact_hashes: BTreeMap::new(),
            beta_star: None,
            beta_star_nmse_db: None,
            duration_secs: 0.0,
            complete: false,
            failures: Vec::new(),
        }
    }

    /// Hash every listed output under `run_dir`.
    pub fn hash_artifacts(&mut self, run_dir: &Path) -> Result<()> {
        self.artifact_hashes.clear();
        let all: Vec<PathBuf> = self
            .checkpoints
            .iter()
            .chain(&self.traces)
            .chain(&self.reports)
            .cloned()
            .collect();
        for rel in all {
            let path = run_dir.join(&rel);
            if !path.exists() {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            self.artifact_hashes
                .insert(rel.to_string_lossy().into_owned(), hex_digest(&bytes));
        }
        Ok(())
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        write_atomic(
            &run_dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(self)?.as_bytes(),
        )
    }

    /// Accepts either a manifest file or a run directory containing one.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "command:      {}\nversion:      {}\ncomplete:     {}\nduration:     {:.1} s\ndataset:      {}\ndataset hash: {}\n",
            self.command,
            self.tool_version,
            self.complete,
            self.duration_secs,
            self.dataset_path.display(),
            self.dataset_hash
        );
        if let Some(c) = &self.input_checkpoint {
            s.push_str(&format!("checkpoint:   {}\n", c.display()));
        }
        if let (Some(b), Some(n)) = (self.beta_star, self.beta_star_nmse_db) {
            s.push_str(&format!("beta*:        {b} (val NMSE {n:.3} dB)\n"));
        }
        for (name, hash) in &self.artifact_hashes {
            s.push_str(&format!("  {hash:.16}  {name}\n"));
        }
        for f in &self.failures {
            s.push_str(&format!("failed: {f}\n"));
        }
        s
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("train", vec!["train".into()], ExperimentConfig::default());
        fs::write(dir.path().join("r.csv"), "x").unwrap();
        m.reports.push("r.csv".into());
        m.hash_artifacts(dir.path()).unwrap();
        assert_eq!(m.artifact_hashes.len(), 1);
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }
}
