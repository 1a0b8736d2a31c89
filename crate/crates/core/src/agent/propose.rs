use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::describe::{constraint_summary, or_none, schema_summary};
use super::project::RunnableProject;
use super::requirements::RequirementSpec;
use super::transcript::{ask, extract_json, Transcript};
use super::utility::{UtilityConfig, UtilityModel, UtilityScore};
use super::AgentError;
use crate::knowledge::{Embedding, IdeaCandidate, KnowledgeBase};
use crate::llm::{LlmBackend, PromptRegistry};
use crate::symlang::{
    enumerate_plans, satisfies_all, validate_plan, ComponentPredicate, ExperimentPlan, FrameworkSchema, ParamValue,
    SlotPlan,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalPolicy {
    /// Utility-ranked candidate groups.
    #[default]
    Utility,
    /// Uniform draws, with replacement, from the constrained grid.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSource {
    Llm,
    /// Built by carrying the cited idea onto a similar executed plan.
    IdeaTransfer { citation: usize, base_experiment: String },
    Enumeration,
    Random,
    /// Re-run of an already executed action; only used when nothing new
    /// is left.
    Repeat,
}

/// An idea candidate consulted while proposing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaCitation {
    /// (worse experiment, better experiment)
    pub source_pair: (String, String),
    pub source_goals: (String, String),
    /// True when either source experiment served a different goal.
    pub cross_goal: bool,
    pub metric: String,
    pub gap: f64,
    pub delta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedExperiment {
    pub plan: ExperimentPlan,
    pub utility: UtilityScore,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedExperimentSet {
    pub hypothesis: String,
    pub target_slot: String,
    pub experiments: Vec<ProposedExperiment>,
    pub citations: Vec<IdeaCitation>,
    pub budget_remaining: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalOptions {
    pub policy: ProposalPolicy,
    pub utility: UtilityConfig,
    pub enumeration_cap: usize,
    pub idea_k: usize,
    pub history_k: usize,
}

impl Default for ProposalOptions {
    fn default() -> Self {
        Self {
            policy: ProposalPolicy::Utility,
            utility: UtilityConfig::default(),
            enumeration_cap: 64,
            idea_k: 3,
            history_k: 5,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawProposal {
    #[serde(default)]
    hypothesis: Option<String>,
    #[serde(default)]
    target_slot: Option<String>,
    #[serde(default)]
    experiments: Vec<BTreeMap<String, RawSlot>>,
}

#[derive(Debug, Deserialize)]
struct RawSlot {
    template: String,
    #[serde(default)]
    parameters: BTreeMap<String, ParamValue>,
    #[serde(default)]
    extension: Option<String>,
}

struct Candidate {
    plan: ExperimentPlan,
    source: CandidateSource,
    declared_target: Option<String>,
    utility: Option<UtilityScore>,
}

/// What identifies an action: the effective configuration of every slot.
pub(crate) fn action_key(plan: &ExperimentPlan, schema: &FrameworkSchema) -> String {
    let mut project = RunnableProject::from_plan(plan, schema);
    for (slot, unit) in project.implementation.units.iter_mut() {
        if let Some(ext) = plan.slots.get(slot).and_then(|s| s.extension.as_ref()) {
            unit.code = Some(ext.clone());
        }
    }
    let mut key = project.render();
    for (slot, unit) in &project.implementation.units {
        if let Some(ext) = &unit.code {
            key.push_str(&format!(" [{slot} extension: {ext}]"));
        }
    }
    key
}

pub struct Proposer<'a> {
    pub spec: &'a RequirementSpec,
    pub kb: &'a KnowledgeBase,
    pub schema: &'a FrameworkSchema,
    pub llm: &'a dyn LlmBackend,
    pub prompts: &'a PromptRegistry,
    pub options: &'a ProposalOptions,
}

impl Proposer<'_> {
    /// Proposes a group of up to `k` experiments that vary one slot.
    pub fn propose(
        &self,
        k: usize,
        budget_remaining: usize,
        transcript: &mut Transcript,
    ) -> Result<ProposedExperimentSet, AgentError> {
        if k == 0 {
            return Err(AgentError::InvalidConfig("proposal width must be at least 1".into()));
        }
        let preds = self.spec.predicates();
        let mut diagnostics = Vec::new();
        let ideas = self.kb.propose_idea_candidates(&self.spec.target_metric, &preds, self.options.idea_k)?;
        let citations = self.citations(&ideas);

        let mut pool = Vec::new();
        let mut hypothesis = None;
        match self.ask_llm(k, &preds, &ideas, transcript) {
            Ok((h, target, plans)) => {
                hypothesis = h;
                pool.extend(plans.into_iter().map(|plan| Candidate {
                    plan,
                    source: CandidateSource::Llm,
                    declared_target: target.clone(),
                    utility: None,
                }));
            }
            Err(problem) => diagnostics.push(format!("language model suggestions unused: {problem}")),
        }
        pool.extend(self.transfer_ideas(&ideas)?);
        pool.extend(
            enumerate_plans(self.schema, &preds, Some(self.options.enumeration_cap))
                .into_iter()
                .map(|plan| Candidate { plan, source: CandidateSource::Enumeration, declared_target: None, utility: None }),
        );

        let executed: HashSet<String> =
            self.kb.experiments().iter().map(|r| action_key(&r.plan, self.schema)).collect();
        let mut seen = HashSet::new();
        let mut dropped = 0usize;
        pool.retain(|c| {
            let ok = validate_plan(&c.plan, self.schema).valid && satisfies_all(&c.plan, &preds, Some(self.schema));
            if !ok {
                dropped += 1;
                return false;
            }
            let key = action_key(&c.plan, self.schema);
            !executed.contains(&key) && seen.insert(key)
        });
        if dropped > 0 {
            diagnostics.push(format!("{dropped} candidate(s) failed validation or constraints"));
        }

        let model = UtilityModel::new(self.kb, self.spec, self.options.utility)?;
        for c in &mut pool {
            c.utility = Some(model.score(&c.plan)?);
        }

        let mut chosen: Vec<Candidate> = Vec::new();
        let mut target_slot = self.schema.slots()[0].name.clone();
        if let Some(leader_idx) = argmax(&pool) {
            let leader = pool.remove(leader_idx);
            target_slot = self.target_slot_for(&leader, &pool);
            let mut group: Vec<usize> = (0..pool.len())
                .filter(|&i| differs_only_in(&leader.plan, &pool[i].plan, &target_slot))
                .collect();
            sort_by_utility(&pool, &mut group);
            group.truncate(k - 1);
            if group.len() + 1 < k {
                let mut rest: Vec<usize> = (0..pool.len()).filter(|i| !group.contains(i)).collect();
                sort_by_utility(&pool, &mut rest);
                let need = k - 1 - group.len();
                if !rest.is_empty() {
                    diagnostics.push(format!("only {} plan(s) vary `{target_slot}` alone; filled with best others", group.len() + 1));
                }
                group.extend(rest.into_iter().take(need));
            }
            let mut taken: Vec<Option<Candidate>> = pool.into_iter().map(Some).collect();
            chosen.push(leader);
            chosen.extend(group.into_iter().map(|i| taken[i].take().expect("index used once")));
        }

        if chosen.len() < k {
            let repeats = self.repeats(&preds, &model, k - chosen.len())?;
            if repeats.is_empty() && chosen.is_empty() {
                diagnostics.push("no candidate satisfies the constraints".into());
            } else if !repeats.is_empty() {
                diagnostics.push("new actions exhausted; repeating executed plans".into());
            }
            chosen.extend(repeats);
        }

        let hypothesis = hypothesis.unwrap_or_else(|| {
            format!("Varying `{target_slot}` with the other slots fixed improves: {}", self.spec.goal_text())
        });
        let experiments = chosen
            .into_iter()
            .map(|c| {
                let mut plan = c.plan;
                plan.retarget(self.schema, &target_slot);
                plan.hypothesis = hypothesis.clone();
                ProposedExperiment { plan, utility: c.utility.expect("scored"), source: c.source }
            })
            .collect();
        Ok(ProposedExperimentSet { hypothesis, target_slot, experiments, citations, budget_remaining, diagnostics })
    }

    /// The uniform-random baseline: `k` draws with replacement.
    pub fn propose_random(
        &self,
        k: usize,
        budget_remaining: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ProposedExperimentSet, AgentError> {
        let preds = self.spec.predicates();
        let grid = enumerate_plans(self.schema, &preds, None);
        let model = UtilityModel::new(self.kb, self.spec, self.options.utility)?;
        let target_slot = self.schema.slots()[0].name.clone();
        let mut experiments = Vec::new();
        for _ in 0..k {
            let Some(plan) = grid.choose(rng) else { break };
            experiments.push(ProposedExperiment {
                plan: plan.clone(),
                utility: model.score(plan)?,
                source: CandidateSource::Random,
            });
        }
        let diagnostics = if grid.is_empty() {
            vec!["no candidate satisfies the constraints".to_string()]
        } else {
            Vec::new()
        };
        Ok(ProposedExperimentSet {
            hypothesis: "uniform random baseline".into(),
            target_slot,
            experiments,
            citations: Vec::new(),
            budget_remaining,
            diagnostics,
        })
    }

    fn citations(&self, ideas: &[IdeaCandidate]) -> Vec<IdeaCitation> {
        let goal = self.spec.goal_text();
        ideas
            .iter()
            .map(|idea| {
                let g = |id: &str| self.kb.experiment(id).map(|r| r.components.goal.clone()).unwrap_or_default();
                let goals = (g(&idea.source_pair.0), g(&idea.source_pair.1));
                IdeaCitation {
                    source_pair: idea.source_pair.clone(),
                    cross_goal: goals.0 != goal || goals.1 != goal,
                    source_goals: goals,
                    metric: idea.metric.clone(),
                    gap: idea.gap,
                    delta: idea.delta.render(),
                }
            })
            .collect()
    }

    fn ask_llm(
        &self,
        k: usize,
        preds: &[ComponentPredicate],
        ideas: &[IdeaCandidate],
        transcript: &mut Transcript,
    ) -> Result<(Option<String>, Option<String>, Vec<ExperimentPlan>), String> {
        let goal = self.spec.goal_text();
        let history: Vec<String> = self
            .kb
            .query_experiments(&goal, preds, self.options.history_k)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| {
                let r = &s.record;
                match r.results.get(&self.spec.target_metric) {
                    Some(v) => format!("{} => {}={v}", r.plan.render(), self.spec.target_metric),
                    None => format!("{} => failed", r.plan.render()),
                }
            })
            .collect();
        let idea_lines: Vec<String> = ideas
            .iter()
            .map(|i| format!("{} (gap {} on {})", i.delta.render(), i.gap, i.metric))
            .collect();
        let vars = BTreeMap::from([
            ("goal", goal),
            ("constraints", constraint_summary(preds)),
            ("schema", schema_summary(self.schema)),
            ("history", or_none(history)),
            ("ideas", or_none(idea_lines)),
            ("k", k.to_string()),
        ]);
        let request = self.prompts.render("propose_experiments", &vars).map_err(|e| e.to_string())?;
        let answer = ask(self.llm, "proposal", &request, transcript).map_err(|e| e.to_string())?;
        let raw: RawProposal = serde_json::from_value(extract_json(&answer)?).map_err(|e| e.to_string())?;
        let target = raw.target_slot.filter(|t| self.schema.slot(t).is_some());
        let first_slot = self.schema.slots()[0].name.clone();
        let plans = raw
            .experiments
            .into_iter()
            .map(|mut slots| {
                let mut plan = ExperimentPlan::new(self.schema, target.as_deref().unwrap_or(&first_slot));
                for slot in self.schema.slots() {
                    if let Some(s) = slots.remove(&slot.name) {
                        let mut sp = SlotPlan::new(s.template);
                        sp.parameters = s.parameters;
                        sp.extension = s.extension;
                        plan.slots.insert(slot.name.clone(), sp);
                    }
                }
                plan
            })
            .collect();
        Ok((raw.hypothesis.filter(|h| !h.trim().is_empty()), target, plans))
    }

    /// Applies each idea's delta to executed plans whose changed slots are
    /// similar enough to the idea's starting point.
    fn transfer_ideas(&self, ideas: &[IdeaCandidate]) -> Result<Vec<Candidate>, AgentError> {
        let threshold = self.kb.config().transfer_threshold;
        let records = self.kb.experiments();
        let mut cache: HashMap<String, Embedding> = HashMap::new();
        let mut embed = |text: String| -> Result<Embedding, AgentError> {
            if let Some(e) = cache.get(&text) {
                return Ok(e.clone());
            }
            let e = self.kb.embed(&text)?;
            cache.insert(text, e.clone());
            Ok(e)
        };
        let mut out = Vec::new();
        for (citation, idea) in ideas.iter().enumerate() {
            for r in records.iter().filter(|r| r.succeeded()) {
                let mut similar = true;
                for change in &idea.delta.changed_slots {
                    let (Some(before), Some(current)) = (&change.before, r.plan.slots.get(&change.slot)) else {
                        similar = false;
                        break;
                    };
                    let sim = embed(before.render())?.cosine(&embed(current.render())?);
                    if sim < threshold {
                        similar = false;
                        break;
                    }
                }
                if similar {
                    out.push(Candidate {
                        plan: idea.delta.apply_to(&r.plan),
                        source: CandidateSource::IdeaTransfer { citation, base_experiment: r.id.clone() },
                        declared_target: match idea.delta.changed_slots.as_slice() {
                            [one] => Some(one.slot.clone()),
                            _ => None,
                        },
                        utility: None,
                    });
                }
            }
        }
        Ok(out)
    }

    fn target_slot_for(&self, leader: &Candidate, pool: &[Candidate]) -> String {
        if let Some(t) = &leader.declared_target {
            return t.clone();
        }
        let mut best = (self.schema.slots()[0].name.clone(), 0usize);
        for (i, slot) in self.schema.slots().iter().enumerate() {
            let n = pool.iter().filter(|c| differs_only_in(&leader.plan, &c.plan, &slot.name)).count();
            if i == 0 || n > best.1 {
                best = (slot.name.clone(), n);
            }
        }
        best.0
    }

    fn repeats(
        &self,
        preds: &[ComponentPredicate],
        model: &UtilityModel<'_>,
        n: usize,
    ) -> Result<Vec<Candidate>, AgentError> {
        let mut out = Vec::new();
        for plan in enumerate_plans(self.schema, preds, Some(self.options.enumeration_cap)).into_iter().take(n) {
            let utility = Some(model.score(&plan)?);
            out.push(Candidate { plan, source: CandidateSource::Repeat, declared_target: None, utility });
        }
        Ok(out)
    }
}

fn aggregate(c: &Candidate) -> f64 {
    c.utility.map_or(f64::NEG_INFINITY, |u| u.aggregate)
}

/// Index of the highest aggregate; the earliest wins ties.
fn argmax(pool: &[Candidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in pool.iter().enumerate() {
        if best.is_none_or(|b| aggregate(c) > aggregate(&pool[b])) {
            best = Some(i);
        }
    }
    best
}

fn sort_by_utility(pool: &[Candidate], idx: &mut [usize]) {
    idx.sort_by(|a, b| aggregate(&pool[*b]).total_cmp(&aggregate(&pool[*a])).then(a.cmp(b)));
}

fn differs_only_in(a: &ExperimentPlan, b: &ExperimentPlan, slot: &str) -> bool {
    a.slots.get(slot) != b.slots.get(slot)
        && a.slots.iter().all(|(s, sp)| s == slot || b.slots.get(s) == Some(sp))
        && b.slots.keys().all(|s| a.slots.contains_key(s))
}
