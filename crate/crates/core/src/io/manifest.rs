use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub sha256: String,
    pub bytes: u64,
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Wall-clock time; the only field that differs between identical runs.
    pub seconds: f64,
    pub certified: bool,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub stages: BTreeMap<String, StageRecord>,
    pub certified: bool,
    /// Every output file below the run directory, by relative path.
    pub files: BTreeMap<String, FileRecord>,
}

impl RunManifest {
    pub fn new(config_hash: &str, seed: u64, threads: Option<usize>) -> Self {
        RunManifest {
            schema_version: MANIFEST_SCHEMA,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed,
            threads,
            stages: BTreeMap::new(),
            certified: true,
            files: BTreeMap::new(),
        }
    }

    /// The manifest already in `dir` if it belongs to the same configuration,
    /// a fresh one otherwise.
    pub fn open(dir: &Path, config_hash: &str, seed: u64, threads: Option<usize>) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        if path.exists() {
            let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            if m.config_hash == config_hash && m.artifact_version == env!("CARGO_PKG_VERSION") {
                return Ok(RunManifest { threads, ..m });
            }
        }
        Ok(RunManifest::new(config_hash, seed, threads))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingPrerequisite(format!("no manifest in {}", dir.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn record_stage(&mut self, stage: &str, seconds: f64, certified: bool, files: BTreeMap<String, FileRecord>) {
        self.files.retain(|_, f| f.stage != stage);
        let names = files.keys().cloned().collect();
        self.files.extend(files);
        self.stages.insert(stage.to_string(), StageRecord { seconds, certified, files: names });
        self.certified = self.stages.values().all(|s| s.certified);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }

    /// Files whose content no longer matches the recorded hash.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(name, rec)| std::fs::read(dir.join(name)).map(|b| sha256_hex(&b) != rec.sha256).unwrap_or(true))
            .map(|(name, _)| name.clone())
            .collect()
    }
}

/// Serialized writes into a run directory that remember what they wrote.
pub struct StageWriter {
    root: PathBuf,
    stage: String,
    written: BTreeMap<String, FileRecord>,
}

impl StageWriter {
    pub fn new(root: &Path, stage: &str) -> Self {
        StageWriter { root: root.to_path_buf(), stage: stage.to_string(), written: BTreeMap::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes)?;
        self.written.insert(
            name.to_string(),
            FileRecord { sha256: sha256_hex(bytes), bytes: bytes.len() as u64, stage: self.stage.clone() },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> BTreeMap<String, FileRecord> {
        self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = StageWriter::new(dir.path(), "stationary");
        w.write("a/b.txt", b"hello").unwrap();
        let mut m = RunManifest::new("h", 0, None);
        m.record_stage("stationary", 0.1, true, w.finish());
        assert_eq!(m.files["a/b.txt"].sha256, sha256_hex(b"hello"));
        assert!(m.verify(dir.path()).is_empty());
        std::fs::write(dir.path().join("a/b.txt"), b"bye").unwrap();
        assert_eq!(m.verify(dir.path()), vec!["a/b.txt".to_string()]);
    }

    #[test]
    fn rerunning_a_stage_replaces_its_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("h", 0, None);
        let mut w = StageWriter::new(dir.path(), "orbits");
        w.write("x", b"1").unwrap();
        w.write("y", b"2").unwrap();
        m.record_stage("orbits", 0.0, false, w.finish());
        assert!(!m.certified);
        let mut w = StageWriter::new(dir.path(), "orbits");
        w.write("x", b"3").unwrap();
        m.record_stage("orbits", 0.0, true, w.finish());
        assert_eq!(m.files.len(), 1);
        assert!(m.certified);
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::open(dir.path(), "h", 0, None).unwrap(), m);
        assert!(RunManifest::open(dir.path(), "other", 0, None).unwrap().files.is_empty());
    }
}
