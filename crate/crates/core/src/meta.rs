//! Provenance metadata written next to every persisted output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version tag embedded in artifacts; independent of any library version.
pub const FORMAT_VERSION: &str = "peace-index/1";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputMeta {
    pub stage: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl OutputMeta {
    pub fn new(stage: &str, config_hash: &str) -> Self {
        OutputMeta {
            stage: stage.to_string(),
            version: FORMAT_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.to_string(), seed);
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.extra.insert(key.to_string(), value);
        self
    }

    /// Writes `<output>.meta.json`.
    pub fn write_sidecar(&self, output: &Path) -> Result<PathBuf> {
        let path = sidecar_path(output);
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
