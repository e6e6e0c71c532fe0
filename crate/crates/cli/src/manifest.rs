//! Record of one run: what was asked for, what was read and what was written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub wall_time_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects artifacts while a subcommand runs.
pub struct Recorder {
    subcommand: String,
    config: serde_json::Value,
    master_seed: u64,
    inputs: Vec<Artifact>,
    outputs: Vec<Artifact>,
    start: Instant,
}

impl Recorder {
    pub fn new(subcommand: &str, config: &impl Serialize, master_seed: u64) -> Result<Self> {
        Ok(Recorder {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config)?,
            master_seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(Artifact { path: path.to_path_buf(), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(Artifact { path: path.to_path_buf(), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn finish(self, path: &Path) -> Result<RunManifest> {
        let m = RunManifest {
            subcommand: self.subcommand,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            master_seed: self.master_seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
        };
        fs::write(path, serde_json::to_string_pretty(&m)? + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(m)
    }
}

/// `dir/stem.manifest.json` for an output file `dir/stem.ext`.
pub fn manifest_path(output: &Path) -> PathBuf {
    sibling(output, "manifest.json")
}

/// `dir/stem.suffix` for `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
