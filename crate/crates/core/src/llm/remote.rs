use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ratelimit::{process_bucket, RateLimit, TokenBucket};
use super::types::{Attempt, ChatRequest, Completion, Usage};
use super::{LlmBackend, LlmError};

pub const API_KEY_ENV: &str = "ARDA_API_KEY";
pub const ENDPOINT_ENV: &str = "ARDA_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    /// Overrides the model named in each request when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub timeout_ms: u64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<RateLimit>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".to_string(),
            model: None,
            timeout_ms: 60_000,
            max_attempts: 3,
            backoff_base_ms: 1_000,
            backoff_max_ms: 30_000,
            rate_limit: None,
        }
    }
}

impl RemoteConfig {
    /// Delay before attempt `n + 1` after `n` failed attempts.
    pub fn backoff(&self, failed: u32) -> Duration {
        let factor = 1u64.checked_shl(failed.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor).min(self.backoff_max_ms))
    }
}

/// A client for an OpenAI-compatible chat-completions endpoint.
pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    bucket: Option<Arc<TokenBucket>>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<set>"))
            .finish()
    }
}

enum Failure {
    Retryable { status: Option<u16>, retry_after: Option<Duration>, message: String, timeout: bool },
    Fatal(LlmError),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        if config.max_attempts == 0 {
            return Err(LlmError::Config("max_attempts must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let bucket = config.rate_limit.map(process_bucket);
        Ok(Self { config, api_key, client, bucket })
    }

    /// Reads the key from `ARDA_API_KEY`.
    pub fn from_env(config: RemoteConfig) -> Result<Self, LlmError> {
        Self::new(config, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    /// Uses a private bucket rather than the process-wide one.
    pub fn with_bucket(mut self, bucket: Arc<TokenBucket>) -> Self {
        self.bucket = Some(bucket);
        self
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn body(&self, request: &ChatRequest) -> Value {
        json!({
            "model": self.config.model.as_deref().unwrap_or(&request.params.model),
            "messages": request.messages,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        })
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<(String, Usage), Failure> {
        let mut builder = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Failure::Retryable {
            status: None,
            retry_after: None,
            timeout: e.is_timeout(),
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response.text().map_err(|e| Failure::Retryable {
            status: Some(status),
            retry_after: None,
            timeout: e.is_timeout(),
            message: e.to_string(),
        })?;
        if status == 429 || (500..600).contains(&status) {
            return Err(Failure::Retryable { status: Some(status), retry_after, timeout: false, message: text });
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(LlmError::Protocol { status: Some(status), message: text }));
        }
        parse_completion(&text).map_err(Failure::Fatal)
    }
}

fn parse_completion(text: &str) -> Result<(String, Usage), LlmError> {
    let protocol = |message: String| LlmError::Protocol { status: None, message };
    let v: Value = serde_json::from_str(text).map_err(|e| protocol(format!("malformed response: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| protocol("response has no choices[0].message.content".into()))?;
    let usage = Usage {
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        completion_tokens: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    };
    Ok((content.to_string(), usage))
}

impl LlmBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let body = self.body(request);
        let started = Instant::now();
        let mut attempts = Vec::new();
        let mut waited = Duration::ZERO;
        let mut n = 0;
        loop {
            n += 1;
            if let Some(bucket) = &self.bucket {
                waited += bucket.acquire();
            }
            match self.attempt(&url, &body) {
                Ok((text, usage)) => {
                    attempts.push(Attempt { number: n, status: Some(200), waited_ms: waited.as_millis() as u64 });
                    return Ok(Completion {
                        text,
                        usage,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts,
                    });
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable { status, retry_after, message, timeout }) => {
                    attempts.push(Attempt { number: n, status, waited_ms: waited.as_millis() as u64 });
                    tracing::warn!(attempt = n, ?status, %message, "chat completion attempt failed");
                    if n >= self.config.max_attempts {
                        return Err(if timeout {
                            LlmError::Timeout { attempts: n }
                        } else {
                            LlmError::RetriesExhausted { attempts: n, last_status: status, message }
                        });
                    }
                    let cap = Duration::from_millis(self.config.backoff_max_ms);
                    let delay = retry_after.map_or(self.config.backoff(n), |r| r.max(self.config.backoff(n))).min(cap);
                    std::thread::sleep(delay);
                    waited = delay;
                }
            }
        }
    }
}
