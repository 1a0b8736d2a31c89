use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::describe::or_none;
use super::project::RunnableProject;
use super::transcript::{ask, extract_json, Transcript};
use super::AgentError;
use crate::knowledge::{ImplementationBundle, ImplementationUnit, InfraCorpus, KnowledgeBase};
use crate::llm::{LlmBackend, Message, PromptRegistry};
use crate::symlang::{decompose, ExperimentPlan, FrameworkSchema, ParamValue, SubTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingOptions {
    /// Total LLM attempts per slot, the first included.
    pub max_attempts: u32,
    pub demonstrations_k: usize,
    pub infrastructure_k: usize,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        Self { max_attempts: 3, demonstrations_k: 2, infrastructure_k: 2 }
    }
}

/// How one slot's grounding went.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotGrounding {
    pub slot: String,
    pub attempts: u32,
    pub grounded: bool,
    /// Problems found in each rejected attempt, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejections: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingOutcome {
    pub project: RunnableProject,
    pub slots: Vec<SlotGrounding>,
}

#[derive(Debug, Deserialize)]
struct RawUnit {
    #[serde(default)]
    template: Option<String>,
    #[serde(default)]
    config: BTreeMap<String, ParamValue>,
    #[serde(default)]
    code: Option<String>,
}

/// Grounds every slot of `plan` in schema order, asking the LLM for a
/// configuration fragment per slot and retrying with the validation
/// problems as feedback. Stops at the first slot that runs out of attempts.
pub fn ground(
    plan: &ExperimentPlan,
    schema: &FrameworkSchema,
    kb: &KnowledgeBase,
    corpus: &InfraCorpus,
    llm: &dyn LlmBackend,
    prompts: &PromptRegistry,
    options: &GroundingOptions,
    transcript: &mut Transcript,
) -> Result<GroundingOutcome, AgentError> {
    let subtasks = decompose(plan, schema)?;
    let mut bundle = ImplementationBundle::default();
    let mut slots = Vec::new();
    let mut failed_slot = None;
    for sub in &subtasks {
        let (unit, report) = ground_slot(sub, schema, kb, corpus, llm, prompts, options, transcript)?;
        let grounded = report.grounded;
        slots.push(report);
        match unit {
            Some(u) if grounded => {
                bundle.units.insert(sub.slot.clone(), u);
            }
            _ => {
                failed_slot = Some(sub.slot.clone());
                break;
            }
        }
    }
    let project = RunnableProject {
        plan: plan.clone(),
        implementation: bundle,
        runnable: failed_slot.is_none(),
        failed_slot,
    };
    Ok(GroundingOutcome { project, slots })
}

#[allow(clippy::too_many_arguments)]
fn ground_slot(
    sub: &SubTask,
    schema: &FrameworkSchema,
    kb: &KnowledgeBase,
    corpus: &InfraCorpus,
    llm: &dyn LlmBackend,
    prompts: &PromptRegistry,
    options: &GroundingOptions,
    transcript: &mut Transcript,
) -> Result<(Option<ImplementationUnit>, SlotGrounding), AgentError> {
    let demos: Vec<String> = kb
        .query_demonstrations(sub, options.demonstrations_k.max(1))?
        .into_iter()
        .map(|d| {
            let config = serde_json::to_string(&d.unit.config).expect("config serializes");
            format!("{} ({}): {} {config}", d.experiment_id, d.slot, d.unit.template)
        })
        .collect();
    let query = match &sub.slot_plan.extension {
        Some(ext) => format!("{} {ext}", sub.slot_plan.render()),
        None => sub.slot_plan.render(),
    };
    let infra: Vec<String> = kb
        .query_infrastructure(&query, corpus, options.infrastructure_k.max(1))?
        .into_iter()
        .map(|h| format!("{}: {}", h.doc_id, h.excerpt))
        .collect();
    let iface = &sub.extension_interface;
    let vars = BTreeMap::from([
        ("slot", sub.slot.clone()),
        ("kind", sub.kind.to_string()),
        ("plan", sub.slot_plan.render()),
        ("template_doc", sub.template_doc.clone()),
        (
            "interface",
            format!("{} Required symbols: {}.", iface.description.trim(), iface.required_symbols.join(", ")),
        ),
        ("demonstrations", or_none(demos)),
        ("infrastructure", or_none(infra)),
    ]);
    let mut request = prompts.render("ground_slot", &vars)?;
    let stage = format!("grounding:{}", sub.slot);
    let mut report = SlotGrounding { slot: sub.slot.clone(), attempts: 0, grounded: false, rejections: Vec::new() };

    for _ in 0..options.max_attempts.max(1) {
        report.attempts += 1;
        let answer = match ask(llm, &stage, &request, transcript) {
            Ok(a) => a,
            Err(e) => {
                report.rejections.push(vec![format!("language model error: {e}")]);
                continue;
            }
        };
        match check_unit(&answer, sub, schema) {
            Ok(unit) => {
                report.grounded = true;
                return Ok((Some(unit), report));
            }
            Err(problems) => {
                tracing::info!(slot = %sub.slot, attempt = report.attempts, ?problems, "grounding answer rejected");
                let feedback = prompts.render(
                    "ground_feedback",
                    &BTreeMap::from([("violations", problems.iter().map(|p| format!("- {p}")).collect::<Vec<_>>().join("\n"))]),
                )?;
                request.messages.push(Message::assistant(answer));
                request.messages.push(feedback.messages.last().expect("user message").clone());
                report.rejections.push(problems);
            }
        }
    }
    Ok((None, report))
}

/// Validates an answer for one slot and merges it over the template
/// defaults and the plan's own parameters.
fn check_unit(answer: &str, sub: &SubTask, schema: &FrameworkSchema) -> Result<ImplementationUnit, Vec<String>> {
    let value = extract_json(answer).map_err(|e| vec![e])?;
    let raw: RawUnit = serde_json::from_value(value).map_err(|e| vec![format!("unexpected structure: {e}")])?;
    let planned = &sub.slot_plan;
    let template_name = raw.template.clone().unwrap_or_else(|| planned.template.clone());
    let mut problems = Vec::new();
    if template_name != planned.template {
        problems.push(format!("template `{template_name}` does not match the planned `{}`", planned.template));
    }
    let template = schema
        .template(&sub.slot, &planned.template)
        .ok_or_else(|| vec![format!("template `{}` is not in slot `{}`", planned.template, sub.slot)])?;
    for (name, v) in &raw.config {
        match template.parameter(name) {
            Some(spec) => {
                if let Some(reason) = spec.domain.check(v) {
                    problems.push(format!("parameter `{name}`: {reason}"));
                }
            }
            None if planned.extension.is_some() => {}
            None => problems.push(format!("`{}` has no parameter `{name}`", planned.template)),
        }
        if let Some(expected) = planned.parameters.get(name) {
            if expected != v {
                problems.push(format!("parameter `{name}` is {v} but the plan sets {expected}"));
            }
        }
    }
    if planned.extension.is_some() {
        match raw.code.as_deref() {
            None | Some("") => problems.push("the plan asks for an extension but no code was given".into()),
            Some(code) => {
                for sym in &sub.extension_interface.required_symbols {
                    if !code.contains(sym.as_str()) {
                        problems.push(format!("code does not define or use `{sym}`"));
                    }
                }
            }
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let mut config = template.defaults.clone();
    config.extend(planned.parameters.clone());
    config.extend(raw.config);
    Ok(ImplementationUnit { kind: sub.kind, template: template_name, config, code: raw.code })
}
