use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scripted::{Exhaustion, Matcher, Script, ScriptEntry};
use super::types::{ChatExchange, ChatRequest, Completion};
use super::{request_fingerprint, LlmBackend, LlmError};

pub const SESSION_VERSION: u32 = 1;

/// An ordered log of completed exchanges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub exchanges: Vec<ChatExchange>,
}

#[derive(Serialize, Deserialize)]
struct SessionLine {
    record_version: u32,
    exchange: ChatExchange,
}

impl Session {
    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }

    /// SHA-256 over requests and responses in order. Timing and usage are
    /// left out so that a replay hashes like the original.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for x in &self.exchanges {
            h.update(serde_json::to_vec(&x.request).expect("request serializes"));
            h.update([0]);
            h.update(x.response.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for x in &self.exchanges {
            let line = SessionLine { record_version: SESSION_VERSION, exchange: x.clone() };
            out.push_str(&serde_json::to_string(&line).expect("exchange serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        let mut exchanges = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SessionLine = serde_json::from_str(&line)
                .map_err(|e| LlmError::Session(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if parsed.record_version != SESSION_VERSION {
                return Err(LlmError::Session(format!(
                    "{}:{}: unsupported record_version {}",
                    path.display(),
                    i + 1,
                    parsed.record_version
                )));
            }
            exchanges.push(parsed.exchange);
        }
        Ok(Self { exchanges })
    }
}

/// Builds a script that answers the recorded requests, in order, with the
/// recorded responses.
pub fn record_replay(session: &Session, exhaustion: Exhaustion) -> Result<Script, LlmError> {
    if session.is_empty() {
        return Err(LlmError::EmptySession);
    }
    Ok(Script {
        exhaustion,
        entries: session
            .exchanges
            .iter()
            .map(|x| ScriptEntry {
                matcher: Matcher::Fingerprint { sha256: request_fingerprint(&x.request) },
                response: x.response.clone(),
                sticky: false,
            })
            .collect(),
    })
}

/// Wraps a backend and logs every successful exchange, optionally
/// appending each one to a JSONL file as it completes.
pub struct RecordingBackend<B> {
    inner: B,
    session: Mutex<Session>,
    sink: Option<Mutex<File>>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, session: Mutex::new(Session::default()), sink: None }
    }

    pub fn with_log(inner: B, path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { inner, session: Mutex::new(Session::default()), sink: Some(Mutex::new(file)) })
    }

    pub fn session(&self) -> Session {
        self.session.lock().expect("lock").clone()
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let completion = self.inner.complete(request)?;
        let exchange = ChatExchange {
            request: request.clone(),
            response: completion.text.clone(),
            usage: completion.usage,
            latency_ms: completion.latency_ms,
        };
        let mut session = self.session.lock().expect("lock");
        if let Some(sink) = &self.sink {
            let line = SessionLine { record_version: SESSION_VERSION, exchange: exchange.clone() };
            let mut text = serde_json::to_string(&line).expect("exchange serializes");
            text.push('\n');
            sink.lock()
                .expect("lock")
                .write_all(text.as_bytes())
                .map_err(|e| LlmError::Io(e.to_string()))?;
        }
        session.exchanges.push(exchange);
        Ok(completion)
    }
}
