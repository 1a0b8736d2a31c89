use serde::{Deserialize, Serialize};

use crate::llm::{ChatRequest, LlmBackend, LlmError, Message, Usage};

/// One LLM call made during a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub messages: Vec<Message>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub usage: Usage,
    pub latency_ms: u64,
}

pub type Transcript = Vec<TranscriptEntry>;

/// Sends a request and logs the exchange, successful or not.
pub(crate) fn ask(
    llm: &dyn LlmBackend,
    stage: &str,
    request: &ChatRequest,
    transcript: &mut Transcript,
) -> Result<String, LlmError> {
    let result = crate::llm::complete(request, llm);
    let mut entry = TranscriptEntry {
        stage: stage.to_string(),
        prompt: request.prompt.clone(),
        messages: request.messages.clone(),
        response: None,
        error: None,
        usage: Usage::default(),
        latency_ms: 0,
    };
    match &result {
        Ok(c) => {
            entry.response = Some(c.text.clone());
            entry.usage = c.usage;
            entry.latency_ms = c.latency_ms;
        }
        Err(e) => entry.error = Some(e.to_string()),
    }
    transcript.push(entry);
    result.map(|c| c.text)
}

/// Parses the JSON object in a model answer, tolerating code fences and
/// surrounding prose.
pub(crate) fn extract_json(text: &str) -> Result<serde_json::Value, String> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(trimmed) {
        return object(v);
    }
    let (Some(start), Some(end)) = (trimmed.find('{'), trimmed.rfind('}')) else {
        return Err("answer contains no JSON object".into());
    };
    if end < start {
        return Err("answer contains no JSON object".into());
    }
    serde_json::from_str(&trimmed[start..=end])
        .map_err(|e| format!("answer is not valid JSON: {e}"))
        .and_then(object)
}

fn object(v: serde_json::Value) -> Result<serde_json::Value, String> {
    if v.is_object() {
        Ok(v)
    } else {
        Err("answer is JSON but not an object".into())
    }
}
