//! Result cache keyed by the canonical bytes of the effective config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Everything a command produced, minus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub payload: Value,
    /// CSV artifacts by file name.
    pub artifacts: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    /// Some required verdict came out inconclusive.
    pub inconclusive: bool,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    outcome: Outcome,
}

/// SHA-256 over the config as JSON with sorted keys and without `out`, plus
/// the crate version so upgrades never serve stale results.
pub fn config_key(cfg: &RunConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(map) = &mut value {
        map.remove("out");
    }
    let mut hasher = Sha256::new();
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    hasher.update([0]);
    hasher.update(serde_json::to_vec(&value).expect("value serializes"));
    hex::encode(hasher.finalize())
}

pub struct Cache {
    dir: PathBuf,
}

pub enum Lookup {
    Hit(Outcome),
    Miss,
    /// An entry existed but could not be used.
    Corrupt(String),
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn lookup(&self, key: &str) -> Lookup {
        let path = self.path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(format!("cache entry {} unreadable: {e}", path.display())),
        };
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(entry) if entry.key == key => Lookup::Hit(entry.outcome),
            Ok(_) => Lookup::Corrupt(format!("cache entry {} belongs to another config", path.display())),
            Err(e) => Lookup::Corrupt(format!("cache entry {} is corrupt: {e}", path.display())),
        }
    }

    /// Write through a temporary file so readers never see half an entry.
    pub fn store(&self, key: &str, outcome: &Outcome) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let entry = Entry { key: key.to_string(), outcome: outcome.clone() };
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&entry)?)?;
        fs::rename(&tmp, self.path(key))
    }
}
