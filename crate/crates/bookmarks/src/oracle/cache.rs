//! Append-only response cache: JSON Lines of checksummed records keyed by
//! hash(role, model, prompt, temperature). Corrupt records are skipped on
//! load, never fatal.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::OracleError;
use crate::oracle::hex_string;

/// One cached response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    /// hash(role, model, prompt, temperature)
    pub key: String,
    /// Role name, stored for inspection (`cache-stats`).
    pub role: String,
    pub model: String,
    pub response: String,
    /// Seconds since the Unix epoch at write time.
    pub timestamp: u64,
    /// sha256(key + NUL + response), hex.
    pub checksum: String,
}

impl CacheRecord {
    fn compute_checksum(key: &str, response: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(key.as_bytes());
        hasher.update([0]);
        hasher.update(response.as_bytes());
        hex_string(&hasher.finalize())
    }

    pub fn is_intact(&self) -> bool {
        self.checksum == Self::compute_checksum(&self.key, &self.response)
    }
}

/// Summary of a cache file scan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub records: usize,
    pub corrupt: usize,
    /// Record counts per role name, sorted by role.
    pub by_role: BTreeMap<String, usize>,
}

/// In-memory index over the cache file, with serialized appends.
pub struct ResponseCache {
    path: Option<PathBuf>,
    index: Mutex<BTreeMap<String, String>>,
    writer: Mutex<Option<std::fs::File>>,
}

impl ResponseCache {
    /// Purely in-memory cache (no persistence). Used when no cache path is
    /// configured.
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            index: Mutex::new(BTreeMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Open (or create) a cache file, loading every intact record. Corrupt
    /// records are counted, logged, and skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        let path = path.as_ref().to_path_buf();
        let mut index = BTreeMap::new();
        if path.exists() {
            let raw = std::fs::read_to_string(&path).map_err(OracleError::CacheIo)?;
            let stats = scan_records(&raw, |record| {
                index.insert(record.key.clone(), record.response.clone());
            });
            if stats.corrupt > 0 {
                log::warn!(
                    "cache {}: skipped {} corrupt record(s)",
                    path.display(),
                    stats.corrupt
                );
            }
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(OracleError::CacheIo)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(OracleError::CacheIo)?;
        Ok(ResponseCache {
            path: Some(path),
            index: Mutex::new(index),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.index.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.index.lock().unwrap().get(key).cloned()
    }

    /// Record a response. The in-memory index is updated first so concurrent
    /// readers see it immediately; the file append is serialized.
    pub fn put(&self, key: &str, role: &str, model: &str, response: &str) -> Result<(), OracleError> {
        self.index
            .lock()
            .unwrap()
            .insert(key.to_string(), response.to_string());
        let mut writer = self.writer.lock().unwrap();
        if let Some(file) = writer.as_mut() {
            let record = CacheRecord {
                key: key.to_string(),
                role: role.to_string(),
                model: model.to_string(),
                response: response.to_string(),
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                checksum: CacheRecord::compute_checksum(key, response),
            };
            let line = serde_json::to_string(&record).expect("cache record serializes");
            writeln!(file, "{line}").map_err(OracleError::CacheIo)?;
        }
        Ok(())
    }
}

/// Scan a cache file's contents, calling `on_record` for each intact record.
fn scan_records(raw: &str, mut on_record: impl FnMut(&CacheRecord)) -> CacheStats {
    let mut stats = CacheStats::default();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CacheRecord>(line) {
            Ok(record) if record.is_intact() => {
                stats.records += 1;
                *stats.by_role.entry(record.role.clone()).or_default() += 1;
                on_record(&record);
            }
            _ => stats.corrupt += 1,
        }
    }
    stats
}

/// Inspect a cache file without loading it into a gateway.
pub fn inspect_cache(path: impl AsRef<Path>) -> Result<CacheStats, OracleError> {
    let raw = std::fs::read_to_string(path).map_err(OracleError::CacheIo)?;
    Ok(scan_records(&raw, |_| {}))
}
