use std::collections::BTreeMap;

use super::plan::{ExperimentPlan, SlotPlan};
use super::predicate::{satisfies_all, ComponentPredicate};
use super::schema::{FrameworkSchema, ModuleSlot};
use super::value::ParamValue;

/// Every choice available for one slot: each template crossed with the
/// values of its searchable parameters. Non-searchable parameters are left
/// unassigned so template defaults apply.
pub fn slot_choices(slot: &ModuleSlot) -> Vec<SlotPlan> {
    let mut out = Vec::new();
    for template in &slot.templates {
        let mut partials: Vec<BTreeMap<String, ParamValue>> = vec![BTreeMap::new()];
        for param in template.parameters.iter().filter(|p| p.searchable) {
            let Some(values) = param.domain.enumerable_values() else {
                continue;
            };
            partials = partials
                .into_iter()
                .flat_map(|partial| {
                    values.iter().map(move |v| {
                        let mut next = partial.clone();
                        next.insert(param.name.clone(), v.clone());
                        next
                    })
                })
                .collect();
        }
        out.extend(partials.into_iter().map(|parameters| SlotPlan {
            template: template.name.clone(),
            parameters,
            extension: None,
        }));
    }
    out
}

/// Enumerates the constrained template grid in lexicographic slot order
/// (last slot varies fastest), stopping after `cap` plans when given.
/// Plans target the first schema slot.
pub fn enumerate_plans(
    schema: &FrameworkSchema,
    constraints: &[ComponentPredicate],
    cap: Option<usize>,
) -> Vec<ExperimentPlan> {
    let choices: Vec<Vec<SlotPlan>> = schema.slots().iter().map(slot_choices).collect();
    let target = schema.slots()[0].name.clone();
    let mut out = Vec::new();
    if choices.iter().any(Vec::is_empty) {
        return out;
    }
    let mut index = vec![0usize; choices.len()];
    loop {
        let mut plan = ExperimentPlan::new(schema, &target);
        for (slot, (options, i)) in schema.slots().iter().zip(choices.iter().zip(&index)) {
            plan.slots.insert(slot.name.clone(), options[*i].clone());
        }
        if satisfies_all(&plan, constraints, Some(schema)) {
            out.push(plan);
            if cap.is_some_and(|c| out.len() >= c) {
                return out;
            }
        }
        // odometer increment
        let mut pos = choices.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < choices[pos].len() {
                break;
            }
            index[pos] = 0;
        }
    }
}
