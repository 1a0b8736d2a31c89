use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::describe::{metric_summary, or_none, schema_summary};
use super::transcript::{ask, extract_json, Transcript};
use super::AgentError;
use crate::knowledge::{Direction, KnowledgeBase};
use crate::llm::{LlmBackend, Message, PromptRegistry};
use crate::symlang::{ComponentPredicate, FrameworkSchema};

pub const DOMAIN_CATEGORY: &str = "domain";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intention {
    pub id: String,
    pub text: String,
}

impl Intention {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, AgentError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(AgentError::EmptyIntention);
        }
        Ok(Self { id: id.into(), text })
    }
}

/// Where a constraint came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Words quoted from the intention.
    Phrase(String),
    /// A retrieved general-knowledge item.
    Knowledge(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracedConstraint {
    pub predicate: ComponentPredicate,
    pub source: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondaryTarget {
    pub metric: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementSpec {
    pub target_metric: String,
    pub direction: Direction,
    #[serde(default)]
    pub secondary_targets: Vec<SecondaryTarget>,
    #[serde(default)]
    pub constraints: Vec<TracedConstraint>,
    pub evaluation_setting: String,
}

impl RequirementSpec {
    pub fn new(target_metric: impl Into<String>, direction: Direction, evaluation_setting: impl Into<String>) -> Self {
        Self {
            target_metric: target_metric.into(),
            direction,
            secondary_targets: Vec::new(),
            constraints: Vec::new(),
            evaluation_setting: evaluation_setting.into(),
        }
    }

    pub fn with_constraint(mut self, predicate: ComponentPredicate, source: Provenance) -> Self {
        self.constraints.push(TracedConstraint { predicate, source });
        self
    }

    pub fn predicates(&self) -> Vec<ComponentPredicate> {
        self.constraints.iter().map(|c| c.predicate.clone()).collect()
    }

    /// The goal text stored with every experiment run for this spec.
    pub fn goal_text(&self) -> String {
        format!("{} {}", self.direction.verb(), self.target_metric)
    }
}

#[derive(Debug, Deserialize)]
struct RawSpec {
    target_metric: String,
    #[serde(default)]
    direction: Option<Direction>,
    #[serde(default)]
    secondary_targets: Vec<SecondaryTarget>,
    #[serde(default)]
    evaluation_setting: Option<String>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
}

#[derive(Debug, Deserialize)]
struct RawConstraint {
    predicate: ComponentPredicate,
    source: RawSource,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSource {
    Phrase { phrase: String },
    Knowledge { knowledge: String },
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Total LLM attempts, the first included.
    pub max_attempts: u32,
    pub knowledge_k: usize,
    pub default_setting: String,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { max_attempts: 3, knowledge_k: 5, default_setting: "default".into() }
    }
}

/// Turns an intention into a [`RequirementSpec`] with an LLM prompt seeded by
/// retrieved domain knowledge. Every constraint must cite a phrase of the
/// intention or one of the retrieved knowledge ids.
pub fn analyze_requirements(
    intention: &Intention,
    kb: &KnowledgeBase,
    schema: &FrameworkSchema,
    llm: &dyn LlmBackend,
    prompts: &PromptRegistry,
    options: &AnalysisOptions,
    transcript: &mut Transcript,
) -> Result<RequirementSpec, AgentError> {
    let knowledge = kb.query_general(&intention.text, DOMAIN_CATEGORY, options.knowledge_k)?;
    let knowledge_lines: Vec<String> = knowledge
        .iter()
        .map(|k| match &k.item.value {
            Some(v) => format!("{}: {} ({v})", k.id, k.item.key),
            None => format!("{}: {}", k.id, k.item.key),
        })
        .collect();
    let vars = BTreeMap::from([
        ("intention", intention.text.clone()),
        ("metrics", metric_summary(&kb.config().metrics)),
        ("schema", schema_summary(schema)),
        ("knowledge", or_none(knowledge_lines)),
    ]);
    let mut request = prompts.render("analyze_requirements", &vars)?;
    let known_ids: Vec<&str> = knowledge.iter().map(|k| k.id.as_str()).collect();

    let mut last_problem = String::new();
    for attempt in 1..=options.max_attempts.max(1) {
        let answer = match ask(llm, "analysis", &request, transcript) {
            Ok(a) => a,
            Err(e) => {
                return Err(AgentError::AnalysisFailed {
                    reason: format!("language model error: {e}"),
                    transcript: transcript.clone(),
                })
            }
        };
        match interpret(&answer, intention, kb, schema, &known_ids, options) {
            Ok(spec) => return Ok(spec),
            Err(Interpretation::Fatal(e)) => return Err(e),
            Err(Interpretation::Retry(problem)) => {
                tracing::info!(attempt, %problem, "requirement analysis answer rejected");
                last_problem = problem.clone();
                let feedback = prompts.render("analysis_feedback", &BTreeMap::from([("problem", problem)]))?;
                request.messages.push(Message::assistant(answer));
                request.messages.push(feedback.messages.last().expect("user message").clone());
            }
        }
    }
    Err(AgentError::AnalysisFailed {
        reason: format!("no usable answer after {} attempt(s): {last_problem}", options.max_attempts.max(1)),
        transcript: transcript.clone(),
    })
}

enum Interpretation {
    Retry(String),
    Fatal(AgentError),
}

fn interpret(
    answer: &str,
    intention: &Intention,
    kb: &KnowledgeBase,
    schema: &FrameworkSchema,
    known_ids: &[&str],
    options: &AnalysisOptions,
) -> Result<RequirementSpec, Interpretation> {
    let value = extract_json(answer).map_err(Interpretation::Retry)?;
    let raw: RawSpec =
        serde_json::from_value(value).map_err(|e| Interpretation::Retry(format!("unexpected structure: {e}")))?;
    let Some(declared) = kb.direction(&raw.target_metric) else {
        return Err(Interpretation::Fatal(AgentError::UnknownTargetMetric(raw.target_metric)));
    };
    for s in &raw.secondary_targets {
        if kb.direction(&s.metric).is_none() {
            return Err(Interpretation::Retry(format!("unknown secondary metric `{}`", s.metric)));
        }
    }
    let lowered = intention.text.to_lowercase();
    let mut constraints = Vec::new();
    for c in raw.constraints {
        c.predicate
            .check_references(schema)
            .map_err(|e| Interpretation::Retry(format!("constraint `{}`: {e}", c.predicate)))?;
        let source = match c.source {
            RawSource::Phrase { phrase } => {
                if phrase.trim().is_empty() || !lowered.contains(&phrase.to_lowercase()) {
                    return Err(Interpretation::Retry(format!(
                        "constraint `{}` cites `{phrase}`, which is not in the intention",
                        c.predicate
                    )));
                }
                Provenance::Phrase(phrase)
            }
            RawSource::Knowledge { knowledge } => {
                if !known_ids.contains(&knowledge.as_str()) {
                    return Err(Interpretation::Retry(format!(
                        "constraint `{}` cites unknown knowledge `{knowledge}`",
                        c.predicate
                    )));
                }
                Provenance::Knowledge(knowledge)
            }
        };
        constraints.push(TracedConstraint { predicate: c.predicate, source });
    }
    Ok(RequirementSpec {
        target_metric: raw.target_metric,
        direction: raw.direction.unwrap_or(declared),
        secondary_targets: raw.secondary_targets,
        constraints,
        evaluation_setting: raw
            .evaluation_setting
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| options.default_setting.clone()),
    })
}
