use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::types::{ChatRequest, Completion};
use super::{request_fingerprint, LlmBackend, LlmError};

/// Decides whether a script entry answers a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Matcher {
    Any,
    /// The request was rendered from the named prompt template.
    Prompt { name: String },
    /// Some message contains the text.
    Contains { text: String },
    /// The final user message equals the text.
    Exact { text: String },
    /// The whole request hashes to this fingerprint.
    Fingerprint { sha256: String },
}

impl Matcher {
    pub fn matches(&self, request: &ChatRequest) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Prompt { name } => request.prompt.as_deref() == Some(name.as_str()),
            Matcher::Contains { text } => request.messages.iter().any(|m| m.content.contains(text.as_str())),
            Matcher::Exact { text } => request.last_user() == text,
            Matcher::Fingerprint { sha256 } => request_fingerprint(request) == *sha256,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    #[default]
    Error,
    /// Answer with the final user message.
    Echo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub response: String,
    /// Sticky entries are not consumed and answer every matching request.
    #[serde(default)]
    pub sticky: bool,
}

/// Canned responses, tried in order. Each non-sticky entry answers once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub exhaustion: Exhaustion,
    #[serde(default, rename = "entry")]
    pub entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn new(exhaustion: Exhaustion) -> Self {
        Self { exhaustion, entries: Vec::new() }
    }

    pub fn push(mut self, matcher: Matcher, response: impl Into<String>) -> Self {
        self.entries.push(ScriptEntry { matcher, response: response.into(), sticky: false });
        self
    }

    pub fn push_sticky(mut self, matcher: Matcher, response: impl Into<String>) -> Self {
        self.entries.push(ScriptEntry { matcher, response: response.into(), sticky: true });
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LlmError> {
        toml::from_str(text).map_err(|e| LlmError::Script(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("script serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// A deterministic backend answering from a [`Script`].
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Script,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        let consumed = Mutex::new(vec![false; script.entries.len()]);
        Self { script, consumed }
    }

    /// Number of non-sticky entries not used yet.
    pub fn remaining(&self) -> usize {
        let consumed = self.consumed.lock().expect("lock");
        self.script
            .entries
            .iter()
            .zip(consumed.iter())
            .filter(|(e, used)| !e.sticky && !**used)
            .count()
    }
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let mut consumed = self.consumed.lock().expect("lock");
        for (i, entry) in self.script.entries.iter().enumerate() {
            if consumed[i] || !entry.matcher.matches(request) {
                continue;
            }
            if !entry.sticky {
                consumed[i] = true;
            }
            return Ok(Completion::immediate(entry.response.clone()));
        }
        match self.script.exhaustion {
            Exhaustion::Echo => Ok(Completion::immediate(request.last_user())),
            Exhaustion::Error => Err(LlmError::ScriptExhausted {
                prompt: request.prompt.clone().unwrap_or_default(),
            }),
        }
    }
}
