use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ground::SlotGrounding;
use super::propose::{CandidateSource, ProposalPolicy, ProposedExperimentSet};
use super::requirements::{Intention, Provenance, RequirementSpec};
use super::transcript::Transcript;
use crate::knowledge::{Direction, MetricVector, RecordStatus};
use crate::symlang::ExperimentPlan;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub experiment_id: String,
    pub plan: String,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub grounding: Vec<SlotGrounding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub index: usize,
    pub proposal: ProposedExperimentSet,
    pub outcomes: Vec<ExperimentOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResult {
    pub experiment_id: String,
    pub plan: ExperimentPlan,
    pub metrics: MetricVector,
}

/// A soft requirement: the secondary metric should not get worse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryCheck {
    pub metric: String,
    pub direction: Direction,
    pub at_best: f64,
    pub reference: f64,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub report_version: u32,
    pub intention: Intention,
    pub spec: RequirementSpec,
    pub budget: usize,
    pub width: usize,
    pub policy: ProposalPolicy,
    pub iterations: Vec<IterationReport>,
    pub best: Option<BestResult>,
    #[serde(default)]
    pub secondary: Vec<SecondaryCheck>,
    pub records_added: usize,
    pub transcript: Transcript,
}

impl CycleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Experiment ids in execution order.
    pub fn experiment_ids(&self) -> Vec<&str> {
        self.iterations
            .iter()
            .flat_map(|i| i.outcomes.iter().map(|o| o.experiment_id.as_str()))
            .collect()
    }

    /// Best-so-far target value after each experiment, succeeded or not.
    pub fn best_trajectory(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        let mut out = Vec::new();
        for o in self.iterations.iter().flat_map(|i| &i.outcomes) {
            if let Some(v) = o.metrics.as_ref().and_then(|m| m.get(&self.spec.target_metric)) {
                if best.is_none_or(|b| self.spec.direction.better(v, b)) {
                    best = Some(v);
                }
            }
            out.push(best);
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Intention {}: {}", self.intention.id, self.intention.text);
        let _ = writeln!(
            s,
            "Target: {} {} under `{}`",
            self.spec.direction.verb(),
            self.spec.target_metric,
            self.spec.evaluation_setting
        );
        for t in &self.spec.secondary_targets {
            let _ = writeln!(s, "Secondary: {} {}", t.direction.verb(), t.metric);
        }
        for c in &self.spec.constraints {
            let source = match &c.source {
                Provenance::Phrase(p) => format!("\"{p}\""),
                Provenance::Knowledge(k) => format!("knowledge {k}"),
            };
            let _ = writeln!(s, "Constraint: {} (from {source})", c.predicate);
        }
        let _ = writeln!(s, "Budget {} x width {} ({:?} proposals)", self.budget, self.width, self.policy);
        for it in &self.iterations {
            let _ = writeln!(s, "\nIteration {}: varying `{}`", it.index + 1, it.proposal.target_slot);
            let _ = writeln!(s, "  Hypothesis: {}", it.proposal.hypothesis);
            for c in &it.proposal.citations {
                let tag = if c.cross_goal { " [other goal]" } else { "" };
                let _ = writeln!(s, "  Idea {} -> {}: {} (gap {:.4}){tag}", c.source_pair.0, c.source_pair.1, c.delta, c.gap);
            }
            for d in &it.proposal.diagnostics {
                let _ = writeln!(s, "  Note: {d}");
            }
            for (p, o) in it.proposal.experiments.iter().zip(&it.outcomes) {
                let source = match &p.source {
                    CandidateSource::Llm => "llm".to_string(),
                    CandidateSource::IdeaTransfer { base_experiment, .. } => format!("idea on {base_experiment}"),
                    CandidateSource::Enumeration => "enumeration".to_string(),
                    CandidateSource::Random => "random".to_string(),
                    CandidateSource::Repeat => "repeat".to_string(),
                };
                let result = match (&o.metrics, &o.failure) {
                    (Some(m), _) => m
                        .get(&self.spec.target_metric)
                        .map_or("no target value".to_string(), |v| format!("{} = {v:.6}", self.spec.target_metric)),
                    (None, Some(f)) => format!("FAILED: {f}"),
                    (None, None) => "FAILED".to_string(),
                };
                let _ = writeln!(
                    s,
                    "  {} [{source}, utility {:.3}] {}\n      {result}",
                    o.experiment_id, p.utility.aggregate, o.plan
                );
            }
        }
        match &self.best {
            Some(b) => {
                let _ = writeln!(
                    s,
                    "\nBest: {} {} = {}\n  {}",
                    b.experiment_id,
                    self.spec.target_metric,
                    b.metrics.get(&self.spec.target_metric).unwrap_or(f64::NAN),
                    b.plan.render()
                );
            }
            None => {
                let _ = writeln!(s, "\nBest: none (no experiment succeeded)");
            }
        }
        for c in &self.secondary {
            let verdict = if c.degraded { "degraded" } else { "maintained" };
            let _ = writeln!(s, "Secondary {}: {} at best vs {} at first ({verdict})", c.metric, c.at_best, c.reference);
        }
        let _ = writeln!(s, "Records added: {}; LLM calls: {}", self.records_added, self.transcript.len());
        s
    }
}
