//! Sidecar records written next to every artifact a command produces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use incongruity_core::{sha256_hex, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

/// Inputs, seed, settings and outputs of one command run. Keys of `inputs`
/// are roles (`corpus`, `train`, ...); keys of `outputs` are file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, FileDigest>,
    pub settings: Value,
    pub outputs: BTreeMap<String, FileDigest>,
    /// Command-specific results.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, settings: Value) -> Self {
        RunManifest {
            command: command.into(),
            seed,
            inputs: BTreeMap::new(),
            settings,
            outputs: BTreeMap::new(),
            details: Value::Null,
        }
    }

    pub fn input(&mut self, role: &str, path: impl AsRef<Path>) -> Result<&mut Self> {
        self.inputs.insert(role.into(), FileDigest::of(path)?);
        Ok(self)
    }

    /// Records a file written next to the manifest, by name only, so that
    /// reruns into another directory produce the same manifest.
    pub fn output(&mut self, path: impl AsRef<Path>) -> Result<&mut Self> {
        let path = path.as_ref();
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let mut digest = FileDigest::of(path)?;
        digest.path.clone_from(&name);
        self.outputs.insert(name, digest);
        Ok(self)
    }

    /// Writes `manifest.json` into `dir` and returns its path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join("manifest.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
