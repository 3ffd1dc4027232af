use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{cache_key, ModelReply, ModelRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: ModelRequest,
    pub reply: ModelReply,
    pub recorded_at: DateTime<Utc>,
}

impl CacheEntry {
    pub fn new(request: ModelRequest, reply: ModelReply) -> Self {
        CacheEntry {
            key: cache_key(&request),
            request,
            reply,
            recorded_at: Utc::now(),
        }
    }
}

/// Append-only JSONL reply cache. Reads go through an in-memory index; all
/// appends are serialised through one writer.
pub struct ReplayCache {
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
    path: Option<PathBuf>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        ReplayCache {
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            path: None,
        }
    }

    /// Open (or create) a cache file. Corrupt lines and entries whose key does
    /// not match their request are skipped with a warning; the first entry for
    /// a key wins.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) if entry.key == cache_key(&entry.request) => {
                        entries.entry(entry.key.clone()).or_insert(entry);
                    }
                    Ok(entry) => warn!(line = idx + 1, key = %entry.key, "cache entry key does not match its request; skipped"),
                    Err(err) => warn!(line = idx + 1, %err, "corrupt cache line skipped"),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ReplayCache {
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert and persist. An existing entry for the same key is kept.
    pub fn insert(&self, entry: CacheEntry) -> std::io::Result<()> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        {
            let mut entries = self.entries.write().expect("cache lock");
            if entries.contains_key(&entry.key) {
                return Ok(());
            }
            entries.insert(entry.key.clone(), entry.clone());
        }
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&entry).expect("cache entries serialize");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }

    /// Entries sorted by key.
    pub fn entries(&self) -> Vec<CacheEntry> {
        let mut out: Vec<_> = self.entries.read().expect("cache lock").values().cloned().collect();
        out.sort_by(|a, b| a.key.cmp(&b.key));
        out
    }
}
