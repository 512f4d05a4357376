use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// A single chat-completion exchange, independent of any provider.
///
/// Construct through [`ChatRequest::new`] so the message and sampling
/// invariants hold; the fields stay public for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        messages: Vec<Message>,
        temperature: f64,
        top_p: f64,
        top_k: Option<u32>,
        max_tokens: Option<u32>,
    ) -> Result<Self, GatewayError> {
        let req = Self {
            model: model.into(),
            messages,
            temperature,
            top_p,
            top_k,
            max_tokens,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let invalid = |m: &str| Err(GatewayError::InvalidRequest(m.to_string()));
        match self.messages.last() {
            None => return invalid("messages must not be empty"),
            Some(m) if m.role != Role::User => return invalid("last message must have role user"),
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid("temperature must lie in [0, 2]");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return invalid("top_p must lie in (0, 1]");
        }
        if self.max_tokens == Some(0) {
            return invalid("max_tokens must be positive");
        }
        Ok(())
    }

    pub fn cache_key(&self) -> CacheKey {
        CacheKey::of(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub cached: bool,
    #[serde(default)]
    pub backend_id: String,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>, backend_id: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            prompt_tokens: 0,
            completion_tokens: 0,
            cached: false,
            backend_id: backend_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub input: Vec<String>,
}

impl EmbedRequest {
    pub fn cache_key(&self) -> CacheKey {
        CacheKey::of(self)
    }
}

/// SHA-256 digest of a request's canonical JSON, as 64 lowercase hex chars.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn of<T: Serialize>(value: &T) -> Self {
        let canonical = canonical_json(value);
        Self(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    pub fn from_hex(digest: &str) -> Option<Self> {
        let ok = digest.len() == 64
            && digest.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        ok.then(|| Self(digest.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("request types always serialize");
    serde_json::to_string(&sort_keys(value)).expect("json values always serialize")
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Scales `v` to unit length in place; the zero vector is left untouched.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ChatRequest {
        ChatRequest::new(
            "gpt-4o-2024-08-06",
            vec![Message::system("You are helpful."), Message::user("Hello")],
            0.0,
            1.0,
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn canonical_form_sorts_keys_and_omits_unset_fields() {
        assert_eq!(
            canonical_json(&sample()),
            r#"{"messages":[{"content":"You are helpful.","role":"system"},{"content":"Hello","role":"user"}],"model":"gpt-4o-2024-08-06","temperature":0.0,"top_p":1.0}"#
        );
    }

    #[test]
    fn digest_matches_reference_hash() {
        // Pinned with Python: hashlib.sha256(json.dumps(req, sort_keys=True, separators=(",", ":")))
        assert_eq!(
            sample().cache_key().as_str(),
            "b1c3c9cde068d3879383226dafcf5767b930a198b63ffb42ac3537fe6ecbb7e3"
        );
    }

    #[test]
    fn same_request_same_digest() {
        assert_eq!(sample().cache_key(), sample().cache_key());
    }

    #[test]
    fn any_field_change_changes_digest() {
        let base = sample();
        let mut t = base.clone();
        t.temperature = 0.1;
        assert_ne!(base.cache_key(), t.cache_key());
        let mut k = base.clone();
        k.top_k = Some(40);
        assert_ne!(base.cache_key(), k.cache_key());
        let mut m = base.clone();
        m.model.push('x');
        assert_ne!(base.cache_key(), m.cache_key());
        let mut c = base.clone();
        c.messages[1].content.push('!');
        assert_ne!(base.cache_key(), c.cache_key());
    }

    #[test]
    fn rejects_invalid_requests() {
        assert!(ChatRequest::new("m", vec![], 0.0, 1.0, None, None).is_err());
        assert!(ChatRequest::new("m", vec![Message::assistant("x")], 0.0, 1.0, None, None).is_err());
        assert!(ChatRequest::new("m", vec![Message::user("x")], 2.5, 1.0, None, None).is_err());
        assert!(ChatRequest::new("m", vec![Message::user("x")], 0.0, 0.0, None, None).is_err());
        assert!(ChatRequest::new("m", vec![Message::user("x")], 0.0, 1.0, None, Some(0)).is_err());
    }

    #[test]
    fn cosine_of_unit_vectors() {
        let mut v = vec![3.0, 4.0];
        l2_normalize(&mut v);
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
    }
}
