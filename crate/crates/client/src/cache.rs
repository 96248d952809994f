//! On-disk response cache keyed by request digest. Entries are written once
//! by atomic rename and never modified.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use diagbench_core::Digest;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_digest: Digest,
    pub model_id: String,
    pub text: String,
    #[serde(default)]
    pub endpoint_metadata: Value,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, digest: &Digest) -> PathBuf {
        self.dir.join(digest.short(2)).join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &Digest) -> std::io::Result<Option<CacheEntry>> {
        let path = self.path_for(digest);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        if entry.request_digest != *digest {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{} holds digest {}", path.display(), entry.request_digest),
            ));
        }
        Ok(Some(entry))
    }

    /// Stores `entry` unless one already exists, in which case the existing
    /// entry wins and is returned.
    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<CacheEntry> {
        let _guard = self.write_lock.lock().expect("cache lock");
        if let Some(existing) = self.get(&entry.request_digest)? {
            return Ok(existing);
        }
        let path = self.path_for(&entry.request_digest);
        let parent = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        serde_json::to_writer_pretty(&mut tmp, entry)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(entry.clone()),
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => {
                self.get(&entry.request_digest)?.ok_or(e.error)
            }
            Err(e) => Err(e.error),
        }
    }

    pub fn len(&self) -> std::io::Result<usize> {
        let mut n = 0;
        for shard in std::fs::read_dir(&self.dir)? {
            let shard = shard?;
            if shard.file_type()?.is_dir() {
                n += std::fs::read_dir(shard.path())?
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count();
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> std::io::Result<bool> {
        Ok(self.len()? == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(text: &str) -> CacheEntry {
        CacheEntry {
            request_digest: Digest::of("req"),
            model_id: "m".into(),
            text: text.into(),
            endpoint_metadata: Value::Null,
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let text = "```python\nprint('é')\n```\n\t trailing  ";
        cache.put(&entry(text)).unwrap();
        let got = cache.get(&Digest::of("req")).unwrap().unwrap();
        assert_eq!(got.text.as_bytes(), text.as_bytes());
        assert_eq!(cache.len().unwrap(), 1);
    }

    #[test]
    fn entries_are_immutable() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        cache.put(&entry("first")).unwrap();
        let kept = cache.put(&entry("second")).unwrap();
        assert_eq!(kept.text, "first");
        assert_eq!(cache.get(&Digest::of("req")).unwrap().unwrap().text, "first");
    }

    #[test]
    fn miss_is_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        assert!(cache.get(&Digest::of("nothing")).unwrap().is_none());
        assert!(cache.is_empty().unwrap());
    }
}
