use std::fmt;

use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::schema::FrameworkSchema;
use super::SchemaError;

/// A constraint on one slot of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentPredicate {
    TemplateEquals { slot: String, template: String },
    TemplateIn { slot: String, templates: Vec<String> },
    TemplateNotIn { slot: String, templates: Vec<String> },
    /// Matches a template tag, a rendered parameter value (defaults included),
    /// or a phrase in the slot's extension text (case-insensitive). `present = false` negates.
    Tag {
        slot: String,
        tag: String,
        #[serde(default = "present_default")]
        present: bool,
    },
}

fn present_default() -> bool {
    true
}

impl ComponentPredicate {
    pub fn slot(&self) -> &str {
        match self {
            ComponentPredicate::TemplateEquals { slot, .. }
            | ComponentPredicate::TemplateIn { slot, .. }
            | ComponentPredicate::TemplateNotIn { slot, .. }
            | ComponentPredicate::Tag { slot, .. } => slot,
        }
    }

    /// Evaluates the predicate. Tag predicates consult template tags and
    /// default parameter values only when a schema is supplied. A plan lacking the slot never matches.
    pub fn matches(&self, plan: &ExperimentPlan, schema: Option<&FrameworkSchema>) -> bool {
        let Some(sp) = plan.slots.get(self.slot()) else {
            return false;
        };
        match self {
            ComponentPredicate::TemplateEquals { template, .. } => sp.template == *template,
            ComponentPredicate::TemplateIn { templates, .. } => templates.contains(&sp.template),
            ComponentPredicate::TemplateNotIn { templates, .. } => !templates.contains(&sp.template),
            ComponentPredicate::Tag { slot, tag, present } => {
                let template = schema.and_then(|s| s.template(slot, &sp.template));
                let by_template = template.is_some_and(|t| t.has_tag(tag));
                let is_tag = |v: &super::value::ParamValue| v.render().eq_ignore_ascii_case(tag);
                let by_value = sp.parameters.values().any(is_tag)
                    || template.is_some_and(|t| {
                        t.defaults.iter().any(|(k, v)| !sp.parameters.contains_key(k) && is_tag(v))
                    });
                let by_extension = sp
                    .extension
                    .as_ref()
                    .is_some_and(|e| e.to_lowercase().contains(&tag.to_lowercase()));
                (by_template || by_value || by_extension) == *present
            }
        }
    }

    /// Checks that the slot and every named template exist in `schema`.
    pub fn check_references(&self, schema: &FrameworkSchema) -> Result<(), SchemaError> {
        let slot = schema
            .slot(self.slot())
            .ok_or_else(|| SchemaError::UnknownReference(format!("slot `{}`", self.slot())))?;
        let names: Vec<&String> = match self {
            ComponentPredicate::TemplateEquals { template, .. } => vec![template],
            ComponentPredicate::TemplateIn { templates, .. }
            | ComponentPredicate::TemplateNotIn { templates, .. } => templates.iter().collect(),
            ComponentPredicate::Tag { .. } => Vec::new(),
        };
        for name in names {
            if slot.template(name).is_none() {
                return Err(SchemaError::UnknownReference(format!(
                    "template `{name}` in slot `{}`",
                    slot.name
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ComponentPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentPredicate::TemplateEquals { slot, template } => write!(f, "{slot} = {template}"),
            ComponentPredicate::TemplateIn { slot, templates } => {
                write!(f, "{slot} in {{{}}}", templates.join(", "))
            }
            ComponentPredicate::TemplateNotIn { slot, templates } => {
                write!(f, "{slot} not in {{{}}}", templates.join(", "))
            }
            ComponentPredicate::Tag { slot, tag, present: true } => write!(f, "{slot} has `{tag}`"),
            ComponentPredicate::Tag { slot, tag, present: false } => write!(f, "{slot} lacks `{tag}`"),
        }
    }
}

pub fn satisfies_all(
    plan: &ExperimentPlan,
    predicates: &[ComponentPredicate],
    schema: Option<&FrameworkSchema>,
) -> bool {
    predicates.iter().all(|p| p.matches(plan, schema))
}
