use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tracing::debug;

use super::{Gateway, GatewayError, ModelRequest, Role, Usage};

#[derive(Debug, Clone)]
pub struct ProviderReply {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, Error)]
pub enum ProviderError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
}

impl ProviderError {
    fn is_transient(&self) -> bool {
        match self {
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            ProviderError::Timeout | ProviderError::Transport(_) => true,
            ProviderError::BadResponse(_) => false,
        }
    }
}

/// One chat-completion backend. Implementations must be thread-safe; the
/// gateway handles caching, retries and the in-flight cap.
pub trait Provider: Send + Sync {
    fn send(&self, req: &ModelRequest) -> Result<ProviderReply, ProviderError>;
}

/// Bounded exponential backoff.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    pub(crate) fn run<F>(&self, mut call: F) -> Result<ProviderReply, GatewayError>
    where
        F: FnMut() -> Result<ProviderReply, ProviderError>,
    {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match call() {
                Ok(reply) => return Ok(reply),
                Err(err) if err.is_transient() && attempt < attempts => {
                    let delay = self.delay_for(attempt);
                    debug!(attempt, ?delay, %err, "transient provider failure, retrying");
                    std::thread::sleep(delay);
                }
                Err(err) => return Err(final_error(err, attempt)),
            }
        }
    }
}

fn final_error(err: ProviderError, attempts: u32) -> GatewayError {
    match err {
        ProviderError::Status { status: 429, .. } => GatewayError::RateLimited { attempts },
        ProviderError::Status { status, body } => GatewayError::ProviderError {
            status,
            body: excerpt(&body),
        },
        ProviderError::Timeout => GatewayError::Timeout,
        ProviderError::Transport(msg) => GatewayError::Transport(msg),
        ProviderError::BadResponse(msg) => GatewayError::ProviderError {
            status: 200,
            body: excerpt(&msg),
        },
    }
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 300;
    if body.len() <= LIMIT {
        return body.to_string();
    }
    let mut end = LIMIT;
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}…", &body[..end])
}

/// Wire format spoken by an HTTP provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    /// `POST` with `{model, messages, temperature, max_tokens}`, reply in
    /// `choices[0].message.content`. Covers OpenAI and compatible servers.
    OpenaiChat,
    /// `generateContent` with `contents[].parts[].text`. `{model}` in the URL
    /// is substituted.
    Gemini,
}

pub struct HttpProvider {
    adapter: Adapter,
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(adapter: Adapter, url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("HTTP client builds");
        HttpProvider {
            adapter,
            url: url.into(),
            api_key,
            client,
        }
    }

    fn request_body(&self, req: &ModelRequest) -> Value {
        match self.adapter {
            Adapter::OpenaiChat => {
                let messages: Vec<Value> = req
                    .messages
                    .iter()
                    .map(|m| {
                        let role = match m.role {
                            Role::System => "system",
                            Role::User => "user",
                            Role::Assistant => "assistant",
                        };
                        json!({"role": role, "content": m.text})
                    })
                    .collect();
                json!({
                    "model": req.model_name,
                    "messages": messages,
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                })
            }
            Adapter::Gemini => {
                let system: Vec<&str> = req
                    .messages
                    .iter()
                    .filter(|m| m.role == Role::System)
                    .map(|m| m.text.as_str())
                    .collect();
                let contents: Vec<Value> = req
                    .messages
                    .iter()
                    .filter(|m| m.role != Role::System)
                    .map(|m| {
                        let role = if m.role == Role::Assistant { "model" } else { "user" };
                        json!({"role": role, "parts": [{"text": m.text}]})
                    })
                    .collect();
                let mut body = json!({
                    "contents": contents,
                    "generationConfig": {
                        "temperature": req.temperature,
                        "maxOutputTokens": req.max_tokens,
                    },
                });
                if !system.is_empty() {
                    body["systemInstruction"] = json!({"parts": [{"text": system.join("\n")}]});
                }
                body
            }
        }
    }

    fn parse_reply(&self, body: &Value) -> Result<ProviderReply, ProviderError> {
        match self.adapter {
            Adapter::OpenaiChat => {
                let text = body
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))?;
                let usage = body.get("usage").and_then(|u| {
                    Some(Usage {
                        prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
                        completion_tokens: u.get("completion_tokens")?.as_u64()?,
                    })
                });
                Ok(ProviderReply {
                    text: text.to_string(),
                    usage,
                })
            }
            Adapter::Gemini => {
                let parts = body
                    .pointer("/candidates/0/content/parts")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ProviderError::BadResponse("missing candidates[0].content.parts".into()))?;
                let text: String = parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
                let usage = body.get("usageMetadata").and_then(|u| {
                    Some(Usage {
                        prompt_tokens: u.get("promptTokenCount")?.as_u64()?,
                        completion_tokens: u.get("candidatesTokenCount")?.as_u64()?,
                    })
                });
                Ok(ProviderReply { text, usage })
            }
        }
    }
}

impl Provider for HttpProvider {
    fn send(&self, req: &ModelRequest) -> Result<ProviderReply, ProviderError> {
        let url = self.url.replace("{model}", &req.model_name);
        let mut builder = self.client.post(&url).json(&self.request_body(req));
        if let Some(key) = &self.api_key {
            builder = match self.adapter {
                Adapter::OpenaiChat => builder.bearer_auth(key),
                Adapter::Gemini => builder.header("x-goog-api-key", key),
            };
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status { status, body: text });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        self.parse_reply(&body)
    }
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    120
}

/// Per-provider entry of the provider config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSettings {
    pub adapter: Adapter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Fallback when `BRU_PROVIDER_<ID>_URL` is unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

/// Provider config file: provider id → settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProviderConfig(pub BTreeMap<String, ProviderSettings>);

pub fn env_url_var(provider_id: &str) -> String {
    format!("BRU_PROVIDER_{}_URL", env_id(provider_id))
}

pub fn env_key_var(provider_id: &str) -> String {
    format!("BRU_PROVIDER_{}_KEY", env_id(provider_id))
}

fn env_id(provider_id: &str) -> String {
    provider_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect()
}

impl ProviderConfig {
    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Register every provider whose endpoint URL is known. Providers without
    /// a URL are left out; requests to them fail with `UnknownProvider`,
    /// which never happens under replay-only runs.
    pub fn register_all(&self, gateway: &mut Gateway) {
        self.register_with(gateway, |var| std::env::var(var).ok())
    }

    pub fn register_with(&self, gateway: &mut Gateway, env: impl Fn(&str) -> Option<String>) {
        for (id, settings) in &self.0 {
            let Some(url) = env(&env_url_var(id)).or_else(|| settings.url.clone()) else {
                debug!(provider = %id, "no endpoint URL configured; provider not registered");
                continue;
            };
            let provider = HttpProvider::new(
                settings.adapter,
                url,
                env(&env_key_var(id)),
                Duration::from_secs(settings.timeout_secs),
            );
            gateway.register(id.clone(), std::sync::Arc::new(provider), settings.max_in_flight);
        }
    }
}
