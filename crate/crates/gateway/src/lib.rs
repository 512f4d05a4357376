//! Backend-agnostic access to chat-completion and embedding models.
//!
//! Every request is reduced to a canonical JSON form whose SHA-256 digest is
//! its [`CacheKey`]. The same digest names entries in the on-disk cache and in
//! replay fixture directories, so a recorded run can be reproduced without
//! network access.

mod backend;
mod cache;
mod config;
mod error;
mod gateway;
mod request;

pub use backend::{Backend, HttpChatBackend, ReplayBackend, RetryPolicy, ScriptedBackend};
pub use cache::{CacheEntry, DiskCache};
pub use config::{load_backend_spec, BackendConfig, SamplingParams, API_KEY_ENV};
pub use error::GatewayError;
pub use gateway::{Gateway, GatewayStats};
pub use request::{
    canonical_json, l2_normalize, cosine, CacheKey, ChatRequest, ChatResponse, EmbedRequest,
    Message, Role,
};
