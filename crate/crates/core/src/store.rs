//! Append-only store of runs and sessions, addressed by content hash.
//!
//! A run's id is the SHA-256 of its canonical `{kind, config, seed}`, so
//! re-running the same configuration and seed lands on the same id. Storing
//! a different result under an existing id is refused.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{domain, Result};
use crate::formats::{canonical_json, canonical_value, read_json, write_atomic};

pub const DATA_DIR_ENV: &str = "RELAYTRAIL_DATA_DIR";
const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRun {
    pub id: String,
    pub kind: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub kind: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ResultStore {
    root: PathBuf,
}

impl ResultStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("runs"))?;
        Ok(Self { root })
    }

    /// Store rooted at `$RELAYTRAIL_DATA_DIR`, or `./relaytrail-data`.
    pub fn from_env() -> Result<Self> {
        let root = std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("relaytrail-data"));
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_id<C: Serialize + ?Sized>(kind: &str, config: &C, seed: Option<u64>) -> Result<String> {
        let key = serde_json::json!({ "kind": kind, "config": canonical_value(config)?, "seed": seed });
        Ok(hex::encode(Sha256::digest(canonical_json(&key)?.as_bytes())))
    }

    fn path_of(&self, id: &str) -> Result<PathBuf> {
        if id.len() != 64 || !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(domain(format!("malformed run id {id:?}")));
        }
        Ok(self.root.join("runs").join(format!("{id}.json")))
    }

    /// Records a run. Storing an identical run again is a no-op.
    pub fn put<C: Serialize + ?Sized, R: Serialize + ?Sized>(
        &self,
        kind: &str,
        config: &C,
        seed: Option<u64>,
        result: &R,
    ) -> Result<StoredRun> {
        let id = Self::run_id(kind, config, seed)?;
        let run = StoredRun {
            id: id.clone(),
            kind: kind.to_string(),
            config: canonical_value(config)?,
            seed,
            result: canonical_value(result)?,
        };
        let path = self.path_of(&id)?;
        if path.exists() {
            let existing: StoredRun = read_json(&path)?;
            if canonical_value(&existing)? != canonical_value(&run)? {
                return Err(domain(format!("run {id} already stored with a different result")));
            }
            return Ok(existing);
        }
        write_atomic(&path, canonical_json(&run)?.as_bytes())?;
        let entry = IndexEntry { id, kind: run.kind.clone(), seed };
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join(INDEX_FILE))?;
        writeln!(f, "{}", serde_json::to_string(&entry)?)?;
        Ok(run)
    }

    pub fn get(&self, id: &str) -> Result<StoredRun> {
        read_json(&self.path_of(id)?)
    }

    pub fn list(&self) -> Result<Vec<IndexEntry>> {
        let path = self.root.join(INDEX_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_share_an_id() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::open(dir.path()).unwrap();
        let cfg = serde_json::json!({"xi_r": 0.01});
        let a = store.put("solve", &cfg, Some(7), &serde_json::json!({"lambda": 0.1})).unwrap();
        let b = store.put("solve", &cfg, Some(7), &serde_json::json!({"lambda": 0.1})).unwrap();
        assert_eq!(a.id, b.id);
        assert_eq!(store.list().unwrap().len(), 1);
        assert!(store.put("solve", &cfg, Some(7), &serde_json::json!({"lambda": 0.2})).is_err());
        let c = store.put("solve", &cfg, Some(8), &serde_json::json!({"lambda": 0.2})).unwrap();
        assert_ne!(a.id, c.id);
        assert_eq!(store.get(&c.id).unwrap(), c);
        assert!(store.get("../etc").is_err());
    }
}
