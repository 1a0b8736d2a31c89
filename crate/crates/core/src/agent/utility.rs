use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::requirements::RequirementSpec;
use super::AgentError;
use crate::knowledge::{Embedding, ExperimentRecord, KnowledgeBase};
use crate::symlang::ExperimentPlan;

/// Weights of exploitation, exploration and future value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub exploitation: f64,
    pub exploration: f64,
    pub future_value: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self { exploitation: 0.5, exploration: 0.4, future_value: 0.1 }
    }
}

impl UtilityWeights {
    pub fn new(exploitation: f64, exploration: f64, future_value: f64) -> Result<Self, AgentError> {
        let w = Self { exploitation, exploration, future_value };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), AgentError> {
        let parts = [self.exploitation, self.exploration, self.future_value];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AgentError::InvalidConfig("utility weights must be non-negative".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(AgentError::InvalidConfig("utility weights must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub weights: UtilityWeights,
    /// Gaussian kernel bandwidth over cosine distance.
    pub bandwidth: f64,
    /// Distance at which exploration saturates at 1.
    pub exploration_clip: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self { weights: UtilityWeights::default(), bandwidth: 0.5, exploration_clip: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityScore {
    pub exploitation: f64,
    pub exploration: f64,
    pub future_value: f64,
    pub aggregate: f64,
    pub weights: UtilityWeights,
}

/// Distances below this are treated as identical plans.
const SAME_PLAN: f64 = 1e-12;

/// A snapshot of the knowledge base prepared for scoring many candidates
/// against one requirement.
pub struct UtilityModel<'a> {
    kb: &'a KnowledgeBase,
    config: UtilityConfig,
    /// (plan embedding, normalized target value) of comparable successes.
    valued: Vec<(Embedding, f64)>,
    /// Every stored plan, failed ones included.
    stored: Vec<Embedding>,
    used_templates: BTreeSet<(String, String)>,
}

impl<'a> UtilityModel<'a> {
    pub fn new(kb: &'a KnowledgeBase, spec: &RequirementSpec, config: UtilityConfig) -> Result<Self, AgentError> {
        config.weights.check()?;
        if !(config.bandwidth > 0.0 && config.exploration_clip > 0.0) {
            return Err(AgentError::InvalidConfig("bandwidth and exploration clip must be positive".into()));
        }
        let records = kb.experiments();
        Ok(Self::from_records(kb, spec, config, &records))
    }

    fn from_records(
        kb: &'a KnowledgeBase,
        spec: &RequirementSpec,
        config: UtilityConfig,
        records: &[std::sync::Arc<ExperimentRecord>],
    ) -> Self {
        let raw: Vec<(Embedding, f64)> = records
            .iter()
            .filter(|r| r.succeeded() && r.results.evaluation_setting == spec.evaluation_setting)
            .filter_map(|r| {
                r.results
                    .get(&spec.target_metric)
                    .map(|v| (r.plan_embedding.clone(), spec.direction.oriented(v)))
            })
            .collect();
        let lo = raw.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let valued = raw
            .into_iter()
            .map(|(e, v)| (e, if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }))
            .collect();
        let stored = records.iter().map(|r| r.plan_embedding.clone()).collect();
        let used_templates = records
            .iter()
            .flat_map(|r| r.plan.slots.iter().map(|(s, sp)| (s.clone(), sp.template.clone())))
            .collect();
        Self { kb, config, valued, stored, used_templates }
    }

    pub fn config(&self) -> &UtilityConfig {
        &self.config
    }

    pub fn score(&self, candidate: &ExperimentPlan) -> Result<UtilityScore, AgentError> {
        let e = self.kb.embed(&candidate.render())?;
        let distance = |other: &Embedding| {
            let d = e.distance(other);
            if d < SAME_PLAN {
                0.0
            } else {
                d
            }
        };

        let exploitation = if self.valued.is_empty() {
            0.5
        } else {
            let two_h2 = 2.0 * self.config.bandwidth * self.config.bandwidth;
            let (mut num, mut den) = (0.0, 0.0);
            for (emb, v) in &self.valued {
                let d = distance(emb);
                let w = (-d * d / two_h2).exp();
                num += w * v;
                den += w;
            }
            num / den
        };

        let exploration = match self.stored.iter().map(distance).reduce(f64::min) {
            None => 1.0,
            Some(d) => d.min(self.config.exploration_clip) / self.config.exploration_clip,
        };

        let total = candidate.slots.len();
        let novel = candidate
            .slots
            .iter()
            .filter(|(s, sp)| !self.used_templates.contains(&((*s).clone(), sp.template.clone())))
            .count();
        let future_value = if total == 0 { 0.0 } else { novel as f64 / total as f64 };

        let w = self.config.weights;
        Ok(UtilityScore {
            exploitation,
            exploration,
            future_value,
            aggregate: w.exploitation * exploitation + w.exploration * exploration + w.future_value * future_value,
            weights: w,
        })
    }
}

/// Scores one candidate against the current knowledge base.
pub fn score_utility(
    candidate: &ExperimentPlan,
    spec: &RequirementSpec,
    kb: &KnowledgeBase,
    config: UtilityConfig,
) -> Result<UtilityScore, AgentError> {
    UtilityModel::new(kb, spec, config)?.score(candidate)
}
