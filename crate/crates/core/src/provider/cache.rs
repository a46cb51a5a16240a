//! Append-only response cache for remote calls. Keyed by a digest of
//! endpoint, model, and the serialized request body, so a rerun of the same
//! experiment replays responses instead of paying for them again.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ProviderError;

/// Stable cache key for one request.
pub fn cache_key(endpoint: &str, model: &str, body: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(endpoint.as_bytes());
    hasher.update([0u8]);
    hasher.update(model.as_bytes());
    hasher.update([0u8]);
    hasher.update(body.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    response: String,
}

/// JSONL-backed key/response store. Entries are held in memory for reads and
/// appended to disk on write; unparseable lines (for instance a torn write
/// from an interrupted run) are skipped on load.
pub struct ResponseCache {
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<File>,
}

impl ResponseCache {
    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| {
                ProviderError::Config(format!("cannot read cache {}: {e}", path.display()))
            })?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| {
                    ProviderError::Config(format!("cannot read cache {}: {e}", path.display()))
                })?;
                if let Ok(record) = serde_json::from_str::<CacheRecord>(&line) {
                    entries.insert(record.key, record.response);
                }
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path).map_err(|e| {
            ProviderError::Config(format!("cannot open cache {} for append: {e}", path.display()))
        })?;
        Ok(ResponseCache { entries: RwLock::new(entries), writer: Mutex::new(writer) })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn put(&self, key: &str, response: &str) {
        {
            let mut entries = self.entries.write().unwrap();
            if entries.contains_key(key) {
                return;
            }
            entries.insert(key.to_string(), response.to_string());
        }
        let record = CacheRecord { key: key.to_string(), response: response.to_string() };
        let line = serde_json::to_string(&record).expect("cache record serializes");
        let mut writer = self.writer.lock().unwrap();
        let _ = writeln!(writer, "{line}");
        let _ = writer.flush();
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_sensitive_to_every_part() {
        let base = cache_key("http://a", "m1", "{}");
        assert_eq!(base.len(), 64);
        assert_ne!(base, cache_key("http://b", "m1", "{}"));
        assert_ne!(base, cache_key("http://a", "m2", "{}"));
        assert_ne!(base, cache_key("http://a", "m1", "{\"x\":1}"));
        assert_eq!(base, cache_key("http://a", "m1", "{}"));
    }

    #[test]
    fn roundtrip_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = ResponseCache::open(&path).unwrap();
            cache.put("k1", "{\"ok\":true}");
            cache.put("k2", "raw body");
            assert_eq!(cache.get("k1").as_deref(), Some("{\"ok\":true}"));
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("k2").as_deref(), Some("raw body"));
        assert_eq!(cache.get("missing"), None);
    }

    #[test]
    fn torn_trailing_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = ResponseCache::open(&path).unwrap();
            cache.put("k1", "body");
        }
        {
            use std::io::Write as _;
            let mut f = OpenOptions::new().append(true).open(&path).unwrap();
            write!(f, "{{\"key\":\"k2\",\"resp").unwrap();
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get("k1").as_deref(), Some("body"));
    }

    #[test]
    fn put_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = ResponseCache::open(&path).unwrap();
        cache.put("k", "first");
        cache.put("k", "second");
        assert_eq!(cache.get("k").as_deref(), Some("first"));
        assert_eq!(cache.len(), 1);
    }
}
