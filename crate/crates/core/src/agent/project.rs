use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{ImplementationBundle, ImplementationUnit, MetricVector};
use crate::symlang::{ExperimentPlan, FrameworkSchema, ParamValue};

/// A plan together with the implementation produced for each slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnableProject {
    pub plan: ExperimentPlan,
    pub implementation: ImplementationBundle,
    /// True only when every slot was grounded.
    pub runnable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_slot: Option<String>,
}

impl RunnableProject {
    /// Implements every slot directly from the plan: template defaults
    /// overlaid with the plan's parameters, no code.
    pub fn from_plan(plan: &ExperimentPlan, schema: &FrameworkSchema) -> Self {
        let mut implementation = ImplementationBundle::default();
        let mut runnable = true;
        for slot in schema.slots() {
            let Some(sp) = plan.slots.get(&slot.name) else {
                runnable = false;
                continue;
            };
            let mut config: BTreeMap<String, ParamValue> = slot
                .template(&sp.template)
                .map(|t| t.defaults.clone())
                .unwrap_or_default();
            config.extend(sp.parameters.clone());
            implementation.units.insert(
                slot.name.clone(),
                ImplementationUnit { kind: slot.kind, template: sp.template.clone(), config, code: None },
            );
        }
        Self { plan: plan.clone(), implementation, runnable, failed_slot: None }
    }

    /// Canonical text of what will actually run.
    pub fn render(&self) -> String {
        self.implementation
            .units
            .iter()
            .map(|(slot, u)| {
                let params = u.config.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ");
                format!("{slot}: {}({params})", u.template)
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("project is not runnable")]
    NotRunnable,
    #[error("environment does not know {0}")]
    Unknown(String),
    #[error("execution failed: {0}")]
    Failed(String),
}

/// Anything that maps a runnable project to observed metrics.
pub trait Environment: Send + Sync {
    fn name(&self) -> &str;

    fn execute(&self, project: &RunnableProject) -> Result<MetricVector, EnvError>;
}
