use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::schema::FrameworkSchema;

/// Identifiers for the rules a plan can break.
pub mod rule {
    pub const SCHEMA_MISMATCH: &str = "schema_mismatch";
    pub const MISSING_SLOT: &str = "missing_slot";
    pub const UNKNOWN_SLOT: &str = "unknown_slot";
    pub const UNKNOWN_TEMPLATE: &str = "unknown_template";
    pub const UNKNOWN_PARAMETER: &str = "unknown_parameter";
    pub const DOMAIN: &str = "domain";
    pub const TARGET_UNKNOWN: &str = "target_unknown";
    pub const TARGET_IN_CONTROLS: &str = "target_in_controls";
    pub const CONTROL_UNKNOWN: &str = "control_unknown";
    /// Notice only: free-text extension cannot be checked statically.
    pub const EXTENSION: &str = "extension";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub slot: String,
    pub rule: String,
    pub message: String,
}

impl Violation {
    fn new(slot: &str, rule: &str, message: impl Into<String>) -> Self {
        Self {
            slot: slot.to_string(),
            rule: rule.to_string(),
            message: message.into(),
        }
    }
}

/// Result of checking a plan. `valid` holds exactly when `violations` is
/// empty; `notices` never affect validity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    #[serde(default)]
    pub notices: Vec<Violation>,
}

pub fn validate_plan(plan: &ExperimentPlan, schema: &FrameworkSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let mut notices = Vec::new();

    if plan.schema != schema.name() {
        violations.push(Violation::new(
            "",
            rule::SCHEMA_MISMATCH,
            format!("plan targets schema `{}`, not `{}`", plan.schema, schema.name()),
        ));
    }

    for slot in schema.slots() {
        let Some(sp) = plan.slots.get(&slot.name) else {
            violations.push(Violation::new(&slot.name, rule::MISSING_SLOT, "no plan for this slot"));
            continue;
        };
        let Some(template) = slot.template(&sp.template) else {
            violations.push(Violation::new(
                &slot.name,
                rule::UNKNOWN_TEMPLATE,
                format!("template `{}` is not offered by slot `{}`", sp.template, slot.name),
            ));
            continue;
        };
        for (name, value) in &sp.parameters {
            match template.parameter(name) {
                Some(spec) => {
                    if let Some(reason) = spec.domain.check(value) {
                        violations.push(Violation::new(
                            &slot.name,
                            rule::DOMAIN,
                            format!("{}.{name}: {reason}", template.name),
                        ));
                    }
                }
                None if sp.extension.is_some() => notices.push(Violation::new(
                    &slot.name,
                    rule::UNKNOWN_PARAMETER,
                    format!("{}.{name} is not declared; covered by the extension", template.name),
                )),
                None => violations.push(Violation::new(
                    &slot.name,
                    rule::UNKNOWN_PARAMETER,
                    format!("{} declares no parameter `{name}`", template.name),
                )),
            }
        }
        if sp.extension.is_some() {
            notices.push(Violation::new(
                &slot.name,
                rule::EXTENSION,
                "extension, unverifiable statically",
            ));
        }
    }

    for name in plan.slots.keys() {
        if schema.slot(name).is_none() {
            violations.push(Violation::new(name, rule::UNKNOWN_SLOT, "schema has no such slot"));
        }
    }

    if schema.slot(&plan.target_slot).is_none() {
        violations.push(Violation::new(
            &plan.target_slot,
            rule::TARGET_UNKNOWN,
            "target slot is not a schema slot",
        ));
    }
    for control in &plan.controls {
        if *control == plan.target_slot {
            violations.push(Violation::new(
                control,
                rule::TARGET_IN_CONTROLS,
                "the manipulated slot cannot also be held fixed",
            ));
        } else if schema.slot(control).is_none() {
            violations.push(Violation::new(control, rule::CONTROL_UNKNOWN, "control is not a schema slot"));
        }
    }

    ValidationReport {
        valid: violations.is_empty(),
        violations,
        notices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlang::{SlotPlan, ParamValue};

    fn base(schema: &FrameworkSchema) -> ExperimentPlan {
        ExperimentPlan::new(schema, "datahandler")
            .with_slot("datahandler", SlotPlan::new("Alpha158").with("normalization", "none"))
            .with_slot("model", SlotPlan::new("LGBModel"))
            .with_slot("evaluation", SlotPlan::new("backtest"))
    }

    #[test]
    fn default_lgb_plan_is_valid() {
        let schema = FrameworkSchema::demo();
        let r = validate_plan(&base(&schema), &schema);
        assert!(r.valid, "{:?}", r.violations);
    }

    #[test]
    fn missing_evaluation_slot() {
        let schema = FrameworkSchema::demo();
        let mut plan = base(&schema);
        plan.slots.shift_remove("evaluation");
        let r = validate_plan(&plan, &schema);
        assert!(!r.valid);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, rule::MISSING_SLOT);
        assert_eq!(r.violations[0].slot, "evaluation");
    }

    #[test]
    fn negative_learning_rate_is_a_domain_violation() {
        let schema = FrameworkSchema::demo();
        let mut plan = base(&schema);
        plan.slots["model"].parameters.insert("learning_rate".into(), ParamValue::Real(-1.0));
        let r = validate_plan(&plan, &schema);
        assert!(!r.valid);
        assert_eq!(r.violations[0].rule, rule::DOMAIN);
        assert!(r.violations[0].message.contains("learning_rate"));
    }

    #[test]
    fn extension_is_flagged_but_valid() {
        let schema = FrameworkSchema::demo();
        let mut plan = base(&schema);
        let dh = plan.slots.get_mut("datahandler").unwrap();
        dh.extension = Some("clip outliers beyond 3 sigma".into());
        dh.parameters.insert("clip_sigma".into(), ParamValue::Real(3.0));
        let r = validate_plan(&plan, &schema);
        assert!(r.valid);
        assert_eq!(r.notices.len(), 2);
        assert!(r.notices.iter().any(|n| n.message == "extension, unverifiable statically"));
    }

    #[test]
    fn target_in_controls_and_unknown_slot() {
        let schema = FrameworkSchema::demo();
        let mut plan = base(&schema);
        plan.controls.push("datahandler".into());
        plan.slots.insert("optimizer".into(), SlotPlan::new("Adam"));
        let rules: Vec<_> = validate_plan(&plan, &schema).violations.into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&rule::TARGET_IN_CONTROLS.to_string()));
        assert!(rules.contains(&rule::UNKNOWN_SLOT.to_string()));
    }
}
