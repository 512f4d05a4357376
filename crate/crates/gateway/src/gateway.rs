use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backend::{vectors_from_entry, Backend};
use crate::cache::{CacheEntry, DiskCache};
use crate::config::SamplingParams;
use crate::error::GatewayError;
use crate::request::{l2_normalize, ChatRequest, ChatResponse, EmbedRequest, Message};

/// Counting semaphore bounding in-flight backend calls.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

#[derive(Default)]
struct Counters {
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

/// Snapshot of gateway activity. Token counts cover backend calls only, so a
/// fully cached rerun reports zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub backend_calls: u64,
    pub cache_hits: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Shared entry point for all model traffic.
///
/// Cheap to share behind an `Arc`; every method takes `&self`.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: Option<DiskCache>,
    sampling: SamplingParams,
    limiter: Limiter,
    counters: Counters,
}

impl Gateway {
    pub const DEFAULT_PARALLELISM: usize = 4;

    pub fn new(backend: Arc<dyn Backend>, sampling: SamplingParams) -> Self {
        Self {
            backend,
            cache: None,
            sampling,
            limiter: Limiter::new(Self::DEFAULT_PARALLELISM),
            counters: Counters::default(),
        }
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.limiter = Limiter::new(n);
        self
    }

    pub fn sampling(&self) -> &SamplingParams {
        &self.sampling
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    /// Builds a request with this gateway's model and sampling parameters.
    pub fn request(&self, messages: Vec<Message>) -> Result<ChatRequest, GatewayError> {
        let s = &self.sampling;
        ChatRequest::new(s.model.clone(), messages, s.temperature, s.top_p, s.top_k, s.max_tokens)
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let key = req.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                let mut resp: ChatResponse = serde_json::from_value(entry.response)?;
                resp.cached = true;
                self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(resp);
            }
        }
        let resp = self.limiter.run(|| self.backend.chat(req))?;
        self.counters.backend_calls.fetch_add(1, Ordering::Relaxed);
        self.counters.prompt_tokens.fetch_add(resp.prompt_tokens, Ordering::Relaxed);
        self.counters.completion_tokens.fetch_add(resp.completion_tokens, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            let entry = CacheEntry {
                request: serde_json::to_value(req)?,
                response: serde_json::to_value(&resp)?,
                timestamp: chrono::Utc::now().to_rfc3339(),
            };
            cache.put(&key, &entry)?;
        }
        Ok(resp)
    }

    /// Embeds `texts`, returning one unit-length vector per input.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let req = EmbedRequest { model: self.sampling.model.clone(), input: texts.to_vec() };
        let key = req.cache_key();
        let cached = match &self.cache {
            Some(cache) => cache.get(&key)?.map(|e| vectors_from_entry(&e.response)).transpose()?,
            None => None,
        };
        let from_cache = cached.is_some();
        let mut vectors = match cached {
            Some(v) => {
                self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                v
            }
            None => {
                let v = self.limiter.run(|| self.backend.embed(&req))?;
                self.counters.backend_calls.fetch_add(1, Ordering::Relaxed);
                v
            }
        };
        if vectors.len() != texts.len() {
            return Err(GatewayError::MalformedPayload(format!(
                "{} vectors for {} inputs",
                vectors.len(),
                texts.len()
            )));
        }
        let dim = vectors[0].len();
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(GatewayError::DimensionMismatch(dim, bad.len()));
        }
        if let (false, Some(cache)) = (from_cache, &self.cache) {
            let entry = CacheEntry {
                request: serde_json::to_value(&req)?,
                response: json!({ "vectors": vectors }),
                timestamp: chrono::Utc::now().to_rfc3339(),
            };
            cache.put(&key, &entry)?;
        }
        vectors.iter_mut().for_each(|v| l2_normalize(v));
        Ok(vectors)
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            backend_calls: self.counters.backend_calls.load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
            prompt_tokens: self.counters.prompt_tokens.load(Ordering::Relaxed),
            completion_tokens: self.counters.completion_tokens.load(Ordering::Relaxed),
        }
    }
}
