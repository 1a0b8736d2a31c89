use crate::knowledge::MetricCatalog;
use crate::symlang::{ComponentPredicate, FrameworkSchema};

/// One line per template: `slot/template [tags] parameters`.
pub(crate) fn schema_summary(schema: &FrameworkSchema) -> String {
    let mut lines = Vec::new();
    for slot in schema.slots() {
        for t in &slot.templates {
            let params: Vec<String> = t
                .parameters
                .iter()
                .map(|p| format!("{}: {}", p.name, p.domain.describe()))
                .collect();
            lines.push(format!(
                "{}/{} [{}] ({})",
                slot.name,
                t.name,
                t.tags.join(", "),
                params.join("; ")
            ));
        }
    }
    lines.join("\n")
}

pub(crate) fn metric_summary(metrics: &MetricCatalog) -> String {
    metrics
        .iter()
        .map(|(m, d)| format!("{m}: {}", d.verb()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn constraint_summary(constraints: &[ComponentPredicate]) -> String {
    if constraints.is_empty() {
        return "(none)".into();
    }
    constraints.iter().map(|c| format!("- {c}")).collect::<Vec<_>>().join("\n")
}

pub(crate) fn or_none(lines: Vec<String>) -> String {
    if lines.is_empty() {
        "(none)".into()
    } else {
        lines.join("\n")
    }
}
