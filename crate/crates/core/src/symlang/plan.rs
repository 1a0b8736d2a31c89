use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::schema::{ExtensionInterface, FrameworkSchema, SlotKind};
use super::validate::validate_plan;
use super::value::ParamValue;
use super::PlanError;

pub const PLAN_DOCUMENT_VERSION: u32 = 1;

/// The configuration chosen for one framework slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub template: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamValue>,
    /// Free-text description of behavior the template does not provide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<String>,
}

impl SlotPlan {
    pub fn new(template: impl Into<String>) -> Self {
        Self {
            template: template.into(),
            parameters: BTreeMap::new(),
            extension: None,
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<ParamValue>) -> Self {
        self.parameters.insert(name.into(), value.into());
        self
    }

    pub fn with_extension(mut self, text: impl Into<String>) -> Self {
        self.extension = Some(text.into());
        self
    }

    /// `Template(k=v, ...)` plus any extension text.
    pub fn render(&self) -> String {
        let mut out = self.template.clone();
        out.push('(');
        for (i, (k, v)) in self.parameters.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{k}={v}");
        }
        out.push(')');
        if let Some(ext) = &self.extension {
            let _ = write!(out, " [extension: {ext}]");
        }
        out
    }
}

/// A fully specified action: one slot plan per framework slot, plus the
/// hypothesis it tests and which slot is the manipulated variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub schema: String,
    #[serde(default)]
    pub hypothesis: String,
    pub target_slot: String,
    #[serde(default)]
    pub controls: Vec<String>,
    pub slots: IndexMap<String, SlotPlan>,
}

impl ExperimentPlan {
    /// Starts a plan for `schema` with the given target slot; every other
    /// schema slot becomes a control.
    pub fn new(schema: &FrameworkSchema, target_slot: &str) -> Self {
        Self {
            schema: schema.name().to_string(),
            hypothesis: String::new(),
            target_slot: target_slot.to_string(),
            controls: schema
                .slot_names()
                .filter(|s| *s != target_slot)
                .map(str::to_string)
                .collect(),
            slots: IndexMap::new(),
        }
    }

    pub fn with_slot(mut self, slot: impl Into<String>, plan: SlotPlan) -> Self {
        self.slots.insert(slot.into(), plan);
        self
    }

    pub fn with_hypothesis(mut self, text: impl Into<String>) -> Self {
        self.hypothesis = text.into();
        self
    }

    /// Re-labels target and controls, keeping slot assignments.
    pub fn retarget(&mut self, schema: &FrameworkSchema, target_slot: &str) {
        self.target_slot = target_slot.to_string();
        self.controls = schema
            .slot_names()
            .filter(|s| *s != target_slot)
            .map(str::to_string)
            .collect();
    }

    /// True when both plans assign identical slot plans, ignoring the
    /// hypothesis and role labels.
    pub fn same_action(&self, other: &ExperimentPlan) -> bool {
        self.schema == other.schema && self.slots == other.slots
    }

    /// Canonical one-line rendering of the action, in slot order.
    pub fn render(&self) -> String {
        self.slots
            .iter()
            .map(|(slot, sp)| format!("{slot}: {}", sp.render()))
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Rendering of all slots of one kind; used for component texts.
    pub fn render_kind(&self, schema: &FrameworkSchema, kind: SlotKind) -> String {
        schema
            .slots()
            .iter()
            .filter(|s| s.kind == kind)
            .filter_map(|s| self.slots.get(&s.name).map(|sp| sp.render()))
            .collect::<Vec<_>>()
            .join(" ; ")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PlanError> {
        let doc: PlanDocument = toml::from_str(text).map_err(|e| PlanError::Parse(e.to_string()))?;
        if doc.schema_version != PLAN_DOCUMENT_VERSION {
            return Err(PlanError::UnsupportedVersion(doc.schema_version));
        }
        Ok(doc.plan)
    }

    pub fn to_toml_string(&self) -> String {
        let doc = PlanDocument {
            schema_version: PLAN_DOCUMENT_VERSION,
            task: None,
            plan: self.clone(),
        };
        toml::to_string(&doc).expect("plans serialize to toml")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlanError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlanDocument {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<String>,
    #[serde(flatten)]
    plan: ExperimentPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    Target,
    Control,
}

/// A single-slot piece of a plan, independently groundable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTask {
    pub slot: String,
    pub kind: SlotKind,
    pub role: SlotRole,
    pub slot_plan: SlotPlan,
    pub extension_interface: ExtensionInterface,
    pub template_doc: String,
}

impl SubTask {
    pub fn render(&self) -> String {
        format!("{} ({}): {}", self.slot, self.kind, self.slot_plan.render())
    }
}

/// Splits a valid plan into one subtask per schema slot, in schema order.
pub fn decompose(plan: &ExperimentPlan, schema: &FrameworkSchema) -> Result<Vec<SubTask>, PlanError> {
    let report = validate_plan(plan, schema);
    if !report.valid {
        return Err(PlanError::Invalid(report.violations));
    }
    Ok(schema
        .slots()
        .iter()
        .map(|slot| {
            let slot_plan = plan.slots[&slot.name].clone();
            let template_doc = slot
                .template(&slot_plan.template)
                .map(|t| t.doc.clone())
                .unwrap_or_default();
            SubTask {
                slot: slot.name.clone(),
                kind: slot.kind,
                role: if slot.name == plan.target_slot {
                    SlotRole::Target
                } else {
                    SlotRole::Control
                },
                slot_plan,
                extension_interface: slot.extension_interface.clone(),
                template_doc,
            }
        })
        .collect())
}
