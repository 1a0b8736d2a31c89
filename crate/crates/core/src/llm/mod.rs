//! Chat-completion backends.
//!
//! [`LlmBackend`] is implemented by [`RemoteBackend`], which speaks the
//! OpenAI-compatible `chat/completions` protocol with retry, backoff and a
//! token-bucket limiter, and by [`ScriptedBackend`], which answers from a
//! canned [`Script`] and is fully deterministic. [`RecordingBackend`] logs
//! exchanges so that a remote session can be turned into a script with
//! [`record_replay`].

mod prompts;
mod ratelimit;
mod recording;
mod remote;
mod scripted;
mod types;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use prompts::{PromptRegistry, PromptTemplate};
pub use ratelimit::{process_bucket, RateLimit, TokenBucket};
pub use recording::{record_replay, RecordingBackend, Session, SESSION_VERSION};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV, ENDPOINT_ENV};
pub use scripted::{Exhaustion, Matcher, Script, ScriptEntry, ScriptedBackend};
pub use types::{Attempt, ChatExchange, ChatParams, ChatRequest, Completion, Message, Role, Usage};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request has no user message")]
    EmptyRequest,
    #[error("invalid message roles: {0}")]
    InvalidRoles(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("gave up after {attempts} attempt(s) (last status {last_status:?}): {message}")]
    RetriesExhausted { attempts: u32, last_status: Option<u16>, message: String },
    #[error("protocol error (status {status:?}): {message}")]
    Protocol { status: Option<u16>, message: String },
    #[error("script has no entry left for request (prompt `{prompt}`)")]
    ScriptExhausted { prompt: String },
    #[error("invalid script: {0}")]
    Script(String),
    #[error("invalid session log: {0}")]
    Session(String),
    #[error("session has no exchanges")]
    EmptySession,
    #[error("prompt error: {0}")]
    Prompt(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Answers a request. Callers should go through [`complete`], which
    /// validates the request first.
    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        (**self).complete(request)
    }
}

/// Validates `request` and sends it to `backend`.
pub fn complete(request: &ChatRequest, backend: &dyn LlmBackend) -> Result<Completion, LlmError> {
    request.validate()?;
    backend.complete(request)
}

/// SHA-256 of the request's canonical JSON form.
pub fn request_fingerprint(request: &ChatRequest) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(request).expect("request serializes")))
}
