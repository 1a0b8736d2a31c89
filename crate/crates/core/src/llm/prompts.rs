use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{ChatRequest, Message};
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    #[serde(default)]
    pub description: String,
    pub system: String,
    pub user: String,
}

/// Named prompt templates with `{{variable}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRegistry {
    pub version: String,
    #[serde(rename = "prompt")]
    pub prompts: BTreeMap<String, PromptTemplate>,
}

impl PromptRegistry {
    pub fn from_toml_str(text: &str) -> Result<Self, LlmError> {
        toml::from_str(text).map_err(|e| LlmError::Prompt(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The registry shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_toml_str(crate::assets::PROMPTS).expect("bundled prompts parse")
    }

    pub fn get(&self, name: &str) -> Option<&PromptTemplate> {
        self.prompts.get(name)
    }

    /// Renders a template into a system + user request tagged with its name.
    /// Every placeholder must be bound and every binding used.
    pub fn render(&self, name: &str, vars: &BTreeMap<&str, String>) -> Result<ChatRequest, LlmError> {
        let t = self
            .get(name)
            .ok_or_else(|| LlmError::Prompt(format!("unknown prompt `{name}`")))?;
        let mut used = BTreeSet::new();
        let system = fill(name, &t.system, vars, &mut used)?;
        let user = fill(name, &t.user, vars, &mut used)?;
        if let Some(extra) = vars.keys().find(|k| !used.contains(**k)) {
            return Err(LlmError::Prompt(format!("prompt `{name}` has no placeholder `{extra}`")));
        }
        Ok(ChatRequest::new(vec![Message::system(system), Message::user(user)]).with_prompt(name))
    }
}

fn fill<'a>(
    name: &str,
    template: &str,
    vars: &BTreeMap<&'a str, String>,
    used: &mut BTreeSet<&'a str>,
) -> Result<String, LlmError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| LlmError::Prompt(format!("prompt `{name}` has an unclosed placeholder")))?;
        let key = after[..end].trim();
        let (k, v) = vars
            .get_key_value(key)
            .ok_or_else(|| LlmError::Prompt(format!("prompt `{name}` needs variable `{key}`")))?;
        used.insert(*k);
        out.push_str(v);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
