//! Content-addressed response cache and the call gateway in front of a
//! provider.
//!
//! Entries live one per file under the cache root, named by the hex SHA-256
//! of `(provider, model, messages, temperature, call index)`. The call index
//! keeps repeated samples of the same prompt distinct.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::provider::{ChatProvider, ChatRequest};
use super::OracleError;

#[derive(Serialize)]
struct KeyMaterial<'a> {
    provider: &'a str,
    request: &'a ChatRequest,
    call_index: u32,
}

pub fn cache_key(provider_id: &str, request: &ChatRequest, call_index: u32) -> String {
    let material = serde_json::to_vec(&KeyMaterial {
        provider: provider_id,
        request,
        call_index,
    })
    .expect("request serializes");
    hex::encode(Sha256::digest(&material))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: ChatRequest,
    pub call_index: u32,
    pub response: String,
    pub created_at: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join(format!("{key}.json"))
    }

    /// Stored response for `key`; unreadable or mismatched entries are
    /// treated as misses.
    pub fn get(&self, key: &str) -> Option<String> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("cache entry {} unreadable: {e}", path.display());
                return None;
            }
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.key == key => Some(entry.response),
            Ok(_) => {
                log::warn!("cache entry {} has a mismatched key; ignoring", path.display());
                None
            }
            Err(e) => {
                log::warn!("cache entry {} is corrupt ({e}); ignoring", path.display());
                None
            }
        }
    }

    /// Writes through a temp file and rename so readers never see partial
    /// entries.
    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<()> {
        let tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        serde_json::to_writer_pretty(tmp.as_file(), entry)?;
        tmp.persist(self.path(&entry.key)).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Counting semaphore bounding in-flight provider calls.
#[derive(Debug)]
pub struct Limiter {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    pub fn new(max_in_flight: usize) -> Self {
        Self {
            slots: Mutex::new(max_in_flight.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut slots = self.slots.lock().unwrap();
            while *slots == 0 {
                slots = self.freed.wait(slots).unwrap();
            }
            *slots -= 1;
        }
        struct Release<'a>(&'a Limiter);
        impl Drop for Release<'_> {
            fn drop(&mut self) {
                *self.0.slots.lock().unwrap() += 1;
                self.0.freed.notify_one();
            }
        }
        let _release = Release(self);
        f()
    }
}

/// Provider front: cache lookup, then a limited, counted provider call.
pub struct CachedProvider {
    inner: Arc<dyn ChatProvider>,
    cache: Option<ResponseCache>,
    limiter: Limiter,
    provider_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl CachedProvider {
    pub fn new(inner: Arc<dyn ChatProvider>, cache: Option<ResponseCache>, parallelism: usize) -> Self {
        Self {
            inner,
            cache,
            limiter: Limiter::new(parallelism),
            provider_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn provider_id(&self) -> &str {
        self.inner.id()
    }

    /// Calls that reached the provider (cache misses).
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn call(&self, request: &ChatRequest, call_index: u32) -> Result<String, OracleError> {
        let key = cache_key(self.inner.id(), request, call_index);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit);
            }
        }
        self.provider_calls.fetch_add(1, Ordering::SeqCst);
        let response = self.limiter.run(|| self.inner.complete(request))?;
        if let Some(cache) = &self.cache {
            let entry = CacheEntry {
                key,
                request: request.clone(),
                call_index,
                response: response.clone(),
                created_at: chrono::Utc::now().to_rfc3339(),
            };
            if let Err(e) = cache.put(&entry) {
                log::warn!("failed to write cache entry {}: {e}", entry.key);
            }
        }
        Ok(response)
    }
}
