use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        Self {
            model: "gpt-4-32k".to_string(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

/// A chat exchange that has not been answered yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// Name of the prompt template that produced the request, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub messages: Vec<Message>,
    pub params: ChatParams,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>) -> Self {
        Self { prompt: None, messages, params: ChatParams::default() }
    }

    pub fn with_prompt(mut self, name: impl Into<String>) -> Self {
        self.prompt = Some(name.into());
        self
    }

    pub fn with_params(mut self, params: ChatParams) -> Self {
        self.params = params;
        self
    }

    /// Content of the final user message.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }

    /// All message contents joined by newlines.
    pub fn text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }

    /// Checks the message sequence: optional leading system message, then
    /// user and assistant turns alternating, ending on a user turn.
    pub fn validate(&self) -> Result<(), LlmError> {
        let mut rest = self.messages.as_slice();
        if let Some(first) = rest.first() {
            if first.role == Role::System {
                rest = &rest[1..];
            }
        }
        if rest.is_empty() {
            return Err(LlmError::EmptyRequest);
        }
        for (i, m) in rest.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if m.role != expected {
                return Err(LlmError::InvalidRoles(format!(
                    "message {} has role {:?}, expected {:?}",
                    i + self.messages.len() - rest.len(),
                    m.role,
                    expected
                )));
            }
        }
        if rest.len() % 2 == 0 {
            return Err(LlmError::InvalidRoles("conversation must end with a user message".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One attempt made by a backend while serving a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub number: u32,
    /// HTTP status, or `None` for a transport failure or timeout.
    pub status: Option<u16>,
    pub waited_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub attempts: Vec<Attempt>,
}

impl Completion {
    pub fn immediate(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: Usage::default(),
            latency_ms: 0,
            attempts: vec![Attempt { number: 1, status: None, waited_ms: 0 }],
        }
    }
}

/// A finished request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response: String,
    pub usage: Usage,
    pub latency_ms: u64,
}
