//! Run manifests: every pipeline output directory records the command,
//! config hash, input digests, seed, timestamps, and output paths, so any
//! result can be traced back to its exact inputs.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("digest {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn sha256_str(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// UTC timestamp like `2026-08-08T12:34:56Z`.
pub fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let days = secs / 86_400;
    let (year, month, day) = civil_from_days(days as i64);
    let rem = secs % 86_400;
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        year,
        month,
        day,
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

/// Days since 1970-01-01 to (year, month, day), civil calendar.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

pub struct ManifestBuilder {
    command: String,
    config_hash: String,
    inputs: Vec<InputDigest>,
    seed: u64,
    started_at: String,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config_hash: String::new(),
            inputs: Vec::new(),
            seed,
            started_at: timestamp(),
            outputs: Vec::new(),
        }
    }

    pub fn config_text(mut self, text: &str) -> Self {
        self.config_hash = sha256_str(text);
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write `run_manifest.json` into the output directory.
    pub fn write(self, out_dir: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            config_hash: self.config_hash,
            inputs: self.inputs,
            seed: self.seed,
            started_at: self.started_at,
            finished_at: timestamp(),
            outputs: self.outputs,
        };
        let path = out_dir.join("run_manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("write {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn civil_conversion_known_dates() {
        assert_eq!(civil_from_days(0), (1970, 1, 1));
        assert_eq!(civil_from_days(19_723), (2024, 1, 1));
        assert_eq!(civil_from_days(11_016), (2000, 2, 29));
    }

    #[test]
    fn timestamp_shape() {
        let t = timestamp();
        assert_eq!(t.len(), 20);
        assert!(t.ends_with('Z'));
        assert_eq!(&t[4..5], "-");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.txt");
        std::fs::write(&input, "hello").unwrap();
        let mut b = ManifestBuilder::new("split", 2025)
            .config_text("trials=1")
            .input(&input)
            .unwrap();
        b.output(&dir.path().join("splits.json"));
        let path = b.write(dir.path()).unwrap();
        let back: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back.command, "split");
        assert_eq!(back.seed, 2025);
        assert_eq!(back.inputs.len(), 1);
        assert_eq!(
            back.inputs[0].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }
}
