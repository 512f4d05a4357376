use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use crate::cache::DiskCache;
use crate::error::GatewayError;
use crate::request::{ChatRequest, ChatResponse, EmbedRequest};

/// Something that can answer chat and embedding requests.
pub trait Backend: Send + Sync {
    /// Short descriptor recorded in responses and run manifests.
    fn id(&self) -> String;

    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    fn embed(&self, req: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError>;
}

type Responder = Box<dyn Fn(&ChatRequest) -> Option<String> + Send + Sync>;

/// In-memory backend for tests and fixture recording.
///
/// Chat requests are answered, in order of preference, by the responder
/// closure, the FIFO queue, and finally the fallback text.
#[derive(Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    vectors: Mutex<VecDeque<Vec<Vec<f64>>>>,
    fallback: Option<String>,
    responder: Option<Responder>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            ..Self::default()
        }
    }

    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn with_responder(
        mut self,
        f: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static,
    ) -> Self {
        self.responder = Some(Box::new(f));
        self
    }

    pub fn with_embeddings(self, batches: Vec<Vec<Vec<f64>>>) -> Self {
        *self.vectors.lock().unwrap() = batches.into();
        self
    }

    pub fn push(&self, text: impl Into<String>) {
        self.queue.lock().unwrap().push_back(text.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    /// Every chat request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.seen.lock().unwrap().push(req.clone());
        let text = self
            .responder
            .as_ref()
            .and_then(|f| f(req))
            .or_else(|| self.queue.lock().unwrap().pop_front())
            .or_else(|| self.fallback.clone())
            .ok_or(GatewayError::ScriptedQueueEmpty)?;
        Ok(ChatResponse::text(text, self.id()))
    }

    fn embed(&self, req: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        let batch = self
            .vectors
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(GatewayError::ScriptedQueueEmpty)?;
        if batch.len() != req.input.len() {
            return Err(GatewayError::MalformedPayload(format!(
                "scripted batch has {} vectors for {} inputs",
                batch.len(),
                req.input.len()
            )));
        }
        Ok(batch)
    }
}

/// Serves recorded responses from `<dir>/<digest>.json`.
pub struct ReplayBackend {
    store: DiskCache,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { store: DiskCache::existing(dir) }
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let key = req.cache_key();
        let entry = self
            .store
            .get(&key)?
            .ok_or_else(|| GatewayError::ReplayMiss(key.to_string()))?;
        let mut resp: ChatResponse = serde_json::from_value(entry.response)?;
        resp.cached = false;
        resp.backend_id = self.id();
        Ok(resp)
    }

    fn embed(&self, req: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        let key = req.cache_key();
        let entry = self
            .store
            .get(&key)?
            .ok_or_else(|| GatewayError::ReplayMiss(key.to_string()))?;
        vectors_from_entry(&entry.response)
    }
}

pub(crate) fn vectors_from_entry(response: &Value) -> Result<Vec<Vec<f64>>, GatewayError> {
    serde_json::from_value(response["vectors"].clone())
        .map_err(|e| GatewayError::MalformedPayload(format!("embedding entry: {e}")))
}

/// Exponential backoff for transient HTTP failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: Duration::from_secs(1), factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Sleep before attempt `attempt` (1-based); zero before the first.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        self.base_delay.mul_f64(self.factor.powi(attempt as i32 - 2))
    }
}

/// OpenAI-style `/chat/completions` and `/embeddings` client.
pub struct HttpChatBackend {
    base_url: String,
    api_key: String,
    embedding_model: Option<String>,
    send_top_k: bool,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Value),
    Transient(String),
    Fatal(GatewayError),
}

impl HttpChatBackend {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        key_env: &str,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let api_key = api_key
            .or_else(|| std::env::var(key_env).ok())
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::AuthMissing(key_env.to_string()))?;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            embedding_model: None,
            send_top_k: false,
            retry: RetryPolicy::default(),
            agent: config.into(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_embedding_model(mut self, model: Option<String>) -> Self {
        self.embedding_model = model;
        self
    }

    pub fn with_top_k(mut self, send: bool) -> Self {
        self.send_top_k = send;
        self
    }

    fn chat_body(&self, req: &ChatRequest) -> Value {
        let mut body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "top_p": req.top_p,
        });
        if let Some(n) = req.max_tokens {
            body["max_tokens"] = json!(n);
        }
        if let (true, Some(k)) = (self.send_top_k, req.top_k) {
            body["top_k"] = json!(k);
        }
        body
    }

    fn attempt(&self, url: &str, body: &Value) -> Attempt {
        let result = self
            .agent
            .post(url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut resp = match result {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Transient(format!("http status {status}"));
        }
        if status >= 400 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(GatewayError::HttpStatus { status, body });
        }
        match resp.body_mut().read_json::<Value>() {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Transient(e.to_string()),
        }
    }

    fn post_with_retry(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let url = format!("{}/{}", self.base_url, path);
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            thread::sleep(self.retry.delay_before(attempt));
            match self.attempt(&url, body) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(msg) => {
                    log::warn!("{url}: attempt {attempt} failed: {msg}");
                    last_error = msg;
                }
            }
        }
        Err(GatewayError::BackendExhausted { attempts: self.retry.max_attempts, last_error })
    }
}

impl Backend for HttpChatBackend {
    fn id(&self) -> String {
        format!("http-chat:{}", host_of(&self.base_url))
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let v = self.post_with_retry("chat/completions", &self.chat_body(req))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::MalformedPayload("missing choices[0].message.content".into()))?
            .to_string();
        Ok(ChatResponse {
            text,
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
            cached: false,
            backend_id: self.id(),
        })
    }

    fn embed(&self, req: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        let model = self.embedding_model.as_deref().unwrap_or(&req.model);
        let v = self.post_with_retry("embeddings", &json!({"model": model, "input": req.input}))?;
        let data = v["data"]
            .as_array()
            .ok_or_else(|| GatewayError::MalformedPayload("missing data array".into()))?;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (i, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().map(|x| x as usize).unwrap_or(i);
            let vector: Vec<f64> = serde_json::from_value(item["embedding"].clone())
                .map_err(|e| GatewayError::MalformedPayload(format!("embedding {i}: {e}")))?;
            rows.push((index, vector));
        }
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

pub(crate) fn host_of(url: &str) -> String {
    let rest = url.split_once("://").map(|(_, r)| r).unwrap_or(url);
    rest.split(['/', '?']).next().unwrap_or(rest).to_string()
}
