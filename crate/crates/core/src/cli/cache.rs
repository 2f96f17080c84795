//! Content-addressed result cache with atomic writes.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version stamped into every entry and key.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "TENSIONLAB_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub version: String,
    pub payload: serde_json::Value,
}

/// Canonical JSON: object keys sorted, floats in shortest round-trip form.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered, so going through `Value` sorts keys
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical serialization of `(namespace, value)` and the
/// tool version.
pub fn cache_key_with_version<T: Serialize>(namespace: &str, value: &T, version: &str) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(version.as_bytes());
    hasher.update([0]);
    hasher.update(namespace.as_bytes());
    hasher.update([0]);
    hasher.update(canonical_json(value)?.as_bytes());
    Ok(hex(&hasher.finalize()))
}

pub fn cache_key<T: Serialize>(namespace: &str, value: &T) -> Result<String> {
    cache_key_with_version(namespace, value, TOOL_VERSION)
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
    version: String,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache {
            dir: dir.into(),
            version: TOOL_VERSION.to_string(),
        }
    }

    /// Cache rooted at `$TENSIONLAB_CACHE` if set, else at `fallback`.
    pub fn from_env(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Cache::new(PathBuf::from(dir)),
            _ => Cache::new(fallback),
        }
    }

    pub fn with_version(mut self, version: &str) -> Self {
        self.version = version.to_string();
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<T: Serialize>(&self, namespace: &str, value: &T) -> Result<String> {
        cache_key_with_version(namespace, value, &self.version)
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Stored payload, or `None` on a miss. Unreadable, corrupt or stale
    /// entries are misses.
    pub fn lookup(&self, key: &str) -> Option<serde_json::Value> {
        let path = self.path(key);
        let text = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.key == key && entry.version == self.version => Some(entry.payload),
            Ok(_) => None,
            Err(err) => {
                log::warn!("ignoring corrupt cache entry {}: {err}", path.display());
                None
            }
        }
    }

    pub fn lookup_as<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let payload = self.lookup(key)?;
        match serde_json::from_value(payload) {
            Ok(v) => Some(v),
            Err(err) => {
                log::warn!("ignoring cache entry {key} with unexpected payload: {err}");
                None
            }
        }
    }

    /// Writes to a temporary file and renames it into place.
    pub fn store<T: Serialize>(&self, key: &str, payload: &T) -> Result<()> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let entry = CacheEntry {
            key: key.to_string(),
            version: self.version.clone(),
            payload: serde_json::to_value(payload)?,
        };
        let text = canonical_json(&entry)?;
        let target = self.path(key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, text).map_err(io(&tmp))?;
        std::fs::rename(&tmp, &target).map_err(io(&target))
    }

    /// Cached value under `key`, or computes, stores and returns it. The
    /// flag is true on a hit.
    pub fn get_or_compute<T, F>(&self, key: &str, compute: F) -> Result<(T, bool)>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.lookup_as(key) {
            return Ok((v, true));
        }
        let v = compute()?;
        self.store(key, &v)?;
        Ok((v, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn miss_then_hit_then_version_bump() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let key = cache.key("t", &[1.0, 2.0]).unwrap();
        assert!(cache.lookup(&key).is_none());
        let payload = serde_json::json!({"value": 0.1, "n": 3});
        cache.store(&key, &payload).unwrap();
        assert_eq!(cache.lookup(&key), Some(payload.clone()));
        let bumped = Cache::new(dir.path()).with_version("999.0.0");
        let key2 = bumped.key("t", &[1.0, 2.0]).unwrap();
        assert_ne!(key, key2);
        assert!(bumped.lookup(&key2).is_none());
        // same key read under another version is stale
        assert!(bumped.lookup(&key).is_none());
    }

    #[test]
    fn key_ignores_field_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[0.5,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":[0.5,2],"a":1}"#).unwrap();
        assert_eq!(cache_key("x", &a).unwrap(), cache_key("x", &b).unwrap());
        let mut m = BTreeMap::new();
        m.insert("b", 1);
        m.insert("a", 2);
        assert_eq!(canonical_json(&m).unwrap(), r#"{"a":2,"b":1}"#);
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let key = cache.key("t", &1).unwrap();
        std::fs::write(dir.path().join(format!("{key}.json")), "{not json").unwrap();
        assert!(cache.lookup(&key).is_none());
        let (v, hit) = cache.get_or_compute(&key, || Ok(5)).unwrap();
        assert_eq!((v, hit), (5, false));
        let (v, hit) = cache.get_or_compute(&key, || Ok(6)).unwrap();
        assert_eq!((v, hit), (5, true));
    }

    #[test]
    fn floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let x = vec![0.1f64, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -0.0];
        let key = cache.key("f", &0).unwrap();
        cache.store(&key, &x).unwrap();
        let back: Vec<f64> = cache.lookup_as(&key).unwrap();
        assert_eq!(
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
