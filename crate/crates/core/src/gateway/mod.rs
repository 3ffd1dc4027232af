//! Uniform chat-completion client with a deterministic record/replay cache.
//!
//! Every request is keyed by [`cache_key`]. Under [`CachePolicy::ReplayOnly`]
//! the gateway never reaches a provider; under [`CachePolicy::LiveRecord`] a
//! provider is called once per cache miss and the reply is appended to the
//! cache file.

mod cache;
mod provider;

pub use cache::{CacheEntry, ReplayCache};
pub use provider::{
    env_key_var, env_url_var, Adapter, HttpProvider, Provider, ProviderConfig, ProviderError, ProviderReply,
    ProviderSettings, RetryPolicy,
};

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn user(text: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub provider_id: String,
    pub model_name: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ModelRequest {
    pub fn single_turn(
        provider_id: impl Into<String>,
        model_name: impl Into<String>,
        prompt: impl Into<String>,
    ) -> Self {
        ModelRequest {
            provider_id: provider_id.into(),
            model_name: model_name.into(),
            messages: vec![Message::user(prompt)],
            temperature: 0.0,
            max_tokens: 1024,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("request has no messages".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} must be a finite value >= 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplySource {
    Live,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReply {
    pub text: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    pub source: ReplySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    LiveRecord,
    ReplayOnly,
    LiveOnly,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no cached reply for request {0}")]
    ReplayMiss(String),
    #[error("provider returned HTTP {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("provider kept rate limiting after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider request timed out")]
    Timeout,
    #[error("provider transport failure: {0}")]
    Transport(String),
    #[error("provider {0:?} is not configured")]
    UnknownProvider(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache I/O failed: {0}")]
    CacheIo(#[from] std::io::Error),
}

impl GatewayError {
    /// Short stable tag used in transcripts.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::ReplayMiss(_) => "ReplayMiss",
            GatewayError::ProviderError { .. } => "ProviderError",
            GatewayError::RateLimited { .. } => "RateLimited",
            GatewayError::Timeout => "Timeout",
            GatewayError::Transport(_) => "Transport",
            GatewayError::UnknownProvider(_) => "UnknownProvider",
            GatewayError::InvalidRequest(_) => "InvalidRequest",
            GatewayError::CacheIo(_) => "CacheIo",
        }
    }
}

fn normalize_line_endings(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Deterministic hex SHA-256 over provider, model, line-ending-normalised
/// messages, temperature and max_tokens.
pub fn cache_key(req: &ModelRequest) -> String {
    #[derive(Serialize)]
    struct KeyMaterial<'a> {
        provider_id: &'a str,
        model_name: &'a str,
        messages: Vec<(Role, String)>,
        temperature: f64,
        max_tokens: u32,
    }
    let material = KeyMaterial {
        provider_id: &req.provider_id,
        model_name: &req.model_name,
        messages: req
            .messages
            .iter()
            .map(|m| (m.role, normalize_line_endings(&m.text)))
            .collect(),
        // -0.0 and 0.0 hash alike
        temperature: if req.temperature == 0.0 { 0.0 } else { req.temperature },
        max_tokens: req.max_tokens,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Counting semaphore capping in-flight live requests for one provider.
struct InFlightLimit {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimit {
    fn new(max: usize) -> Self {
        InFlightLimit {
            max: max.max(1),
            current: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.current.lock().expect("limit lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limit lock");
        }
        *n += 1;
        InFlightGuard { limit: self }
    }
}

struct InFlightGuard<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.limit.current.lock().expect("limit lock");
        *n -= 1;
        self.limit.freed.notify_one();
    }
}

struct ProviderSlot {
    provider: Arc<dyn Provider>,
    limit: InFlightLimit,
}

/// Provider registry plus cache. Safe to share across threads.
pub struct Gateway {
    providers: HashMap<String, ProviderSlot>,
    cache: Arc<ReplayCache>,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(cache: Arc<ReplayCache>) -> Self {
        Gateway {
            providers: HashMap::new(),
            cache,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn register(&mut self, provider_id: impl Into<String>, provider: Arc<dyn Provider>, max_in_flight: usize) {
        self.providers.insert(
            provider_id.into(),
            ProviderSlot {
                provider,
                limit: InFlightLimit::new(max_in_flight),
            },
        );
    }

    pub fn cache(&self) -> &Arc<ReplayCache> {
        &self.cache
    }

    pub fn complete(&self, req: &ModelRequest, policy: CachePolicy) -> Result<ModelReply, GatewayError> {
        req.validate()?;
        let key = cache_key(req);
        if policy != CachePolicy::LiveOnly {
            if let Some(entry) = self.cache.get(&key) {
                let mut reply = entry.reply;
                reply.source = ReplySource::Cache;
                return Ok(reply);
            }
            if policy == CachePolicy::ReplayOnly {
                return Err(GatewayError::ReplayMiss(key));
            }
        }
        let reply = self.call_live(req)?;
        if policy == CachePolicy::LiveRecord {
            self.cache.insert(CacheEntry::new(req.clone(), reply.clone()))?;
        }
        Ok(reply)
    }

    fn call_live(&self, req: &ModelRequest) -> Result<ModelReply, GatewayError> {
        let slot = self
            .providers
            .get(&req.provider_id)
            .ok_or_else(|| GatewayError::UnknownProvider(req.provider_id.clone()))?;
        let _permit = slot.limit.acquire();
        let started = Instant::now();
        let reply = self.retry.run(|| slot.provider.send(req))?;
        Ok(ModelReply {
            text: reply.text,
            latency_ms: started.elapsed().as_millis() as u64,
            usage: reply.usage,
            source: ReplySource::Live,
        })
    }
}
