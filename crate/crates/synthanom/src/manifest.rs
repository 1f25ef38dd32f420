//! Run configuration, its hash, and the manifest written next to every
//! set of outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use synthanom_core::sampler::SyntheticConfig;
use synthanom_core::train::TrainConfig;

use crate::error::{AppError, AppResult};
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to replay a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub datasets: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Command-specific parameters (experiment grids and the like).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: &str, output_dir: PathBuf, seed: u64) -> Self {
        RunConfig {
            command: command.into(),
            datasets: BTreeMap::new(),
            schema: None,
            train: None,
            synthetic: None,
            output_dir,
            seed,
            params: serde_json::Value::Null,
        }
    }

    pub fn hash(&self) -> AppResult<String> {
        sha256_json(self)
    }
}

/// Hex SHA-256 of the compact JSON encoding.
pub fn sha256_json<T: Serialize + ?Sized>(value: &T) -> AppResult<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> AppResult<String> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    /// Output file name → SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config: RunConfig) -> AppResult<Self> {
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.hash()?,
            config,
            files: BTreeMap::new(),
        })
    }

    /// Hashes `names` (relative to the output directory) and writes the
    /// manifest there.
    pub fn write(mut self, names: &[&str]) -> AppResult<PathBuf> {
        let dir = self.config.output_dir.clone();
        for name in names {
            self.files.insert((*name).to_string(), sha256_file(&dir.join(name))?);
        }
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, &self)?;
        Ok(path)
    }
}
