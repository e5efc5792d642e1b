use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Record of one completed stage. A stage is current when its config slice
/// and inputs hash to the recorded values and every output still has its
/// recorded content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config_hash: String,
    pub inputs_hash: String,
    /// Output file paths relative to the run directory, with content hashes.
    pub outputs: BTreeMap<String, String>,
}

impl StageManifest {
    pub fn path(root: &Path, stage: &str) -> PathBuf {
        root.join("manifests").join(format!("{stage}.json"))
    }

    pub fn load(root: &Path, stage: &str) -> Result<Option<Self>> {
        let path = Self::path(root, stage);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(path)?)?))
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = Self::path(root, &self.stage);
        fs::create_dir_all(path.parent().expect("manifest path has a parent"))?;
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Whether the recorded outputs are still on disk unchanged.
    pub fn outputs_intact(&self, root: &Path) -> Result<bool> {
        for (rel, hash) in &self.outputs {
            let path = root.join(rel);
            if !path.is_file() || &hash_file(&path)? != hash {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(hash_bytes(&serde_json::to_vec(value)?))
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(hash_bytes(&fs::read(path)?))
}

fn rel_string(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Every regular file under `rels` (files or directories relative to
/// `root`), keyed by relative path with content hashes.
pub fn hash_tree(root: &Path, rels: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack: Vec<PathBuf> = rels.iter().map(|r| root.join(r)).collect();
    while let Some(path) = stack.pop() {
        if path.is_dir() {
            for entry in fs::read_dir(&path)? {
                stack.push(entry?.path());
            }
        } else if path.is_file() {
            out.insert(rel_string(root, &path), hash_file(&path)?);
        } else {
            return Err(Error::Missing(format!("{} does not exist", path.display())));
        }
    }
    Ok(out)
}

/// One hash over the listed inputs' paths and contents.
pub fn hash_inputs(root: &Path, rels: &[&str]) -> Result<String> {
    hash_json(&hash_tree(root, rels)?)
}
