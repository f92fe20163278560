//! Stage output directories and their manifests.
//!
//! Every stage writes into `<out>/<stage>/` and finishes with a
//! `manifest.json` listing the SHA-256 of each output, of each external
//! input, and of the upstream manifests it read. Manifests carry no
//! timestamps, so identical runs produce identical manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    /// Absent for append-only logs whose byte order depends on scheduling.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub stopwords_version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Effective configuration after command-line overrides.
    pub config: String,
    /// The config file as written, when one was given.
    pub config_source: String,
    pub inputs: Vec<FileHash>,
    pub upstream: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(CliError::io(path))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).map_err(CliError::io(path))?;
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects the outputs of one stage.
pub struct StageDir {
    pub root: PathBuf,
    pub dir: PathBuf,
    command: &'static str,
    outputs: Vec<FileHash>,
    inputs: Vec<FileHash>,
    upstream: Vec<FileHash>,
}

impl StageDir {
    pub fn create(out: &Path, command: &'static str) -> Result<Self> {
        let dir = out.join(command);
        fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        Ok(StageDir { root: out.to_path_buf(), dir, command, outputs: Vec::new(), inputs: Vec::new(), upstream: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        self.outputs.push(FileHash { path: self.rel(&path), sha256: Some(sha256_hex(bytes)) });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes serializable rows as CSV with a header taken from the first row's field names.
    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// Writes CSV from an explicit header and pre-formatted records; used
    /// where rows may be empty but the header must still appear.
    pub fn write_records(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// Records a file written by other means (e.g. streamed), hashed now.
    pub fn record_output(&mut self, path: &Path, hashed: bool) -> Result<()> {
        let sha256 = if hashed { Some(sha256_file(path)?) } else { None };
        self.outputs.push(FileHash { path: self.rel(path), sha256 });
        Ok(())
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash { path: path.display().to_string(), sha256: Some(sha256_file(path)?) });
        Ok(())
    }

    /// Reads an upstream stage artifact, failing with the producing command
    /// when it is absent, and chains the upstream manifest.
    pub fn require_upstream(&mut self, stage: &'static str, name: &str) -> Result<PathBuf> {
        let dir = self.root.join(stage);
        let artifact = dir.join(name);
        let manifest = dir.join(MANIFEST);
        if !artifact.exists() || !manifest.exists() {
            return Err(CliError::MissingArtifact { artifact, producer: stage });
        }
        let rel = self.rel(&manifest);
        if !self.upstream.iter().any(|u| u.path == rel) {
            self.upstream.push(FileHash { path: rel, sha256: Some(sha256_file(&manifest)?) });
        }
        Ok(artifact)
    }

    pub fn finish(mut self, cfg: &LoadedConfig) -> Result<Manifest> {
        let config = cfg.config.to_toml();
        let manifest = Manifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stopwords_version: greenai_core::textprep::STOPWORDS_VERSION.to_string(),
            seed: cfg.config.seed,
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            config_source: cfg.source_text.clone(),
            inputs: std::mem::take(&mut self.inputs),
            upstream: std::mem::take(&mut self.upstream),
            outputs: std::mem::take(&mut self.outputs),
        };
        let path = self.path(MANIFEST);
        let mut f = fs::File::create(&path).map_err(CliError::io(&path))?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n").map_err(CliError::io(&path))?;
        Ok(manifest)
    }
}
