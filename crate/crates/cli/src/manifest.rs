//! Run manifests: a JSON record of exactly how a set of output files was
//! produced — tool version, resolved configuration, input digests, seed,
//! and timestamps.
//!
//! Text tables reference their manifest through a `run_id` column; binary
//! outputs are referenced the other way around, by digest, in the
//! manifest's `outputs` list. The run id is derived from the inputs,
//! configuration, and seed (never from the clock), so a replayed run keeps
//! its id and its data files byte-identical.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use fqlens_core::error::{Error, Result};

/// A file path together with the SHA-256 of its contents.
#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Hex SHA-256 of a file's contents, streamed.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", hasher.finalize()))
}

/// Collects the facts of a run as it progresses and writes the manifest
/// once the outputs exist.
pub struct ManifestBuilder {
    command: &'static str,
    started: DateTime<Utc>,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    seed: Option<u64>,
    skipped_loci: serde_json::Value,
}

impl ManifestBuilder {
    pub fn new(command: &'static str) -> Self {
        ManifestBuilder {
            command,
            started: Utc::now(),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            seed: None,
            skipped_loci: serde_json::json!({}),
        }
    }

    /// Registers and digests one input file.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Records the fully resolved configuration (flags and files merged).
    pub fn set_config(&mut self, config: serde_json::Value) {
        self.config = config;
    }

    /// Records the seed driving any randomized stage of the run.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Records how many loci the run set aside and why.
    pub fn set_skipped_loci(&mut self, tally: serde_json::Value) {
        self.skipped_loci = tally;
    }

    /// The deterministic run identifier: a digest of version, command,
    /// configuration, input digests, and seed. Timestamps are excluded so
    /// replays keep their id.
    pub fn run_id(&self) -> String {
        let key = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": &self.config,
            "inputs": &self.inputs,
            "seed": self.seed,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        format!("{digest:x}")[..12].to_string()
    }

    /// Writes the manifest JSON next to the finished outputs.
    pub fn write(&self, path: &Path, outputs: Vec<FileDigest>) -> Result<()> {
        let stamp =
            |t: &DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
        let manifest = serde_json::json!({
            "tool": "fqlens",
            "version": env!("CARGO_PKG_VERSION"),
            "run_id": self.run_id(),
            "command": self.command,
            "rng": self.seed.map(|_| "chacha8"),
            "seed": self.seed,
            "config": &self.config,
            "inputs": &self.inputs,
            "outputs": outputs,
            "skipped_loci": &self.skipped_loci,
            "started": stamp(&self.started),
            "finished": stamp(&Utc::now()),
        });
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut file, &manifest)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// The conventional manifest path for a table written to `out`.
pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
