//! Atomic file output and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use npforest_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// `<prefix>.<suffix>` without touching any extension already in `prefix`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_owned(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything needed to reproduce a run. Contains no timestamps so reruns
/// are byte-identical.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub parameters: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub results: Value,
}

impl Manifest {
    pub fn new(command: &'static str, parameters: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters: to_value(parameters)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Value::Null,
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest::of(path)?);
        Ok(())
    }

    /// Writes `contents` atomically and records the path.
    pub fn emit(&mut self, path: PathBuf, contents: &[u8]) -> Result<()> {
        write_atomic(&path, contents)?;
        self.outputs.push(path);
        Ok(())
    }

    /// Writes the manifest to `<prefix>.manifest.json` and returns its path.
    pub fn finish(self, prefix: &Path) -> Result<PathBuf> {
        let path = with_suffix(prefix, "manifest.json");
        let mut text =
            serde_json::to_string_pretty(&self).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(e.to_string()))
}
