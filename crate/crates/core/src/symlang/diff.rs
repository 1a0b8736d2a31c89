use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, SlotPlan};
use super::PlanError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotChange {
    pub slot: String,
    pub before: Option<SlotPlan>,
    pub after: Option<SlotPlan>,
}

/// The slot-wise difference between two plans over one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDelta {
    pub changed_slots: Vec<SlotChange>,
    pub unchanged_slots: Vec<String>,
}

impl PlanDelta {
    pub fn is_empty(&self) -> bool {
        self.changed_slots.is_empty()
    }

    pub fn changed_names(&self) -> Vec<&str> {
        self.changed_slots.iter().map(|c| c.slot.as_str()).collect()
    }

    /// Swaps before and after.
    pub fn reversed(&self) -> PlanDelta {
        PlanDelta {
            changed_slots: self
                .changed_slots
                .iter()
                .map(|c| SlotChange {
                    slot: c.slot.clone(),
                    before: c.after.clone(),
                    after: c.before.clone(),
                })
                .collect(),
            unchanged_slots: self.unchanged_slots.clone(),
        }
    }

    /// Applies the `after` side of every change onto `plan`.
    pub fn apply_to(&self, plan: &ExperimentPlan) -> ExperimentPlan {
        let mut out = plan.clone();
        for change in &self.changed_slots {
            match &change.after {
                Some(sp) => {
                    out.slots.insert(change.slot.clone(), sp.clone());
                }
                None => {
                    out.slots.shift_remove(&change.slot);
                }
            }
        }
        out
    }

    pub fn render(&self) -> String {
        self.changed_slots
            .iter()
            .map(|c| {
                let show = |sp: &Option<SlotPlan>| sp.as_ref().map_or("<absent>".to_string(), SlotPlan::render);
                format!("{}: {} -> {}", c.slot, show(&c.before), show(&c.after))
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Lists the slots whose template, parameters or extension text differ.
/// Slot order follows `a`, then any slots present only in `b`.
pub fn diff_plans(a: &ExperimentPlan, b: &ExperimentPlan) -> Result<PlanDelta, PlanError> {
    if a.schema != b.schema {
        return Err(PlanError::SchemaMismatch {
            left: a.schema.clone(),
            right: b.schema.clone(),
        });
    }
    let mut changed_slots = Vec::new();
    let mut unchanged_slots = Vec::new();
    let names = a
        .slots
        .keys()
        .chain(b.slots.keys().filter(|k| !a.slots.contains_key(*k)));
    for name in names {
        let before = a.slots.get(name);
        let after = b.slots.get(name);
        if before == after {
            unchanged_slots.push(name.clone());
        } else {
            changed_slots.push(SlotChange {
                slot: name.clone(),
                before: before.cloned(),
                after: after.cloned(),
            });
        }
    }
    Ok(PlanDelta {
        changed_slots,
        unchanged_slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlang::FrameworkSchema;

    fn plan(norm: &str, model: &str, market: &str) -> ExperimentPlan {
        let schema = FrameworkSchema::demo();
        ExperimentPlan::new(&schema, "datahandler")
            .with_slot("datahandler", SlotPlan::new("Alpha158").with("normalization", norm))
            .with_slot("model", SlotPlan::new(model))
            .with_slot("evaluation", SlotPlan::new("backtest").with("market", market))
    }

    #[test]
    fn identical_plans_have_no_changes() {
        let p = plan("none", "LGBModel", "a_share");
        let d = diff_plans(&p, &p).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.unchanged_slots.len(), 3);
    }

    #[test]
    fn every_slot_mutated_means_every_slot_changed() {
        let a = plan("none", "LGBModel", "a_share");
        let b = plan("MinMaxNorm", "LSTM", "us");
        let d = diff_plans(&a, &b).unwrap();
        assert_eq!(d.changed_names(), ["datahandler", "model", "evaluation"]);
        assert!(d.unchanged_slots.is_empty());
    }

    #[test]
    fn apply_reproduces_target() {
        let a = plan("none", "LGBModel", "a_share");
        let b = plan("MinMaxNorm", "LGBModel", "a_share");
        let d = diff_plans(&a, &b).unwrap();
        assert!(d.apply_to(&a).same_action(&b));
        assert_eq!(
            d.render(),
            "datahandler: Alpha158(normalization=none) -> Alpha158(normalization=MinMaxNorm)"
        );
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let a = plan("none", "LGBModel", "a_share");
        let mut b = a.clone();
        b.schema = "other".into();
        assert!(matches!(diff_plans(&a, &b), Err(PlanError::SchemaMismatch { .. })));
    }
}
