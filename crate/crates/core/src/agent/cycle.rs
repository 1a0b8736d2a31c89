use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ground::{ground, GroundingOptions, SlotGrounding};
use super::project::{Environment, RunnableProject};
use super::propose::{ProposalOptions, ProposalPolicy, ProposedExperimentSet, Proposer};
use super::report::{BestResult, CycleReport, ExperimentOutcome, IterationReport, SecondaryCheck, REPORT_VERSION};
use super::requirements::{analyze_requirements, AnalysisOptions, Intention, RequirementSpec};
use super::transcript::Transcript;
use super::AgentError;
use crate::knowledge::{ExperimentRecord, InfraCorpus, KnowledgeBase, MetricVector, RecordDraft, RecordStatus};
use crate::llm::{LlmBackend, PromptRegistry};
use crate::symlang::FrameworkSchema;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Milliseconds since the Unix epoch.
    #[default]
    Wall,
    /// A counter starting after the records already stored; replays of the
    /// same run produce the same timestamps.
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub budget: usize,
    pub width: usize,
    /// Seeds the random proposal policy.
    pub seed: u64,
    pub clock: ClockMode,
    pub proposal: ProposalOptions,
    pub analysis_attempts: u32,
    pub grounding: GroundingOptions,
    pub knowledge_k: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            budget: 5,
            width: 2,
            seed: 0,
            clock: ClockMode::Wall,
            proposal: ProposalOptions::default(),
            analysis_attempts: 3,
            grounding: GroundingOptions::default(),
            knowledge_k: 5,
        }
    }
}

impl CycleConfig {
    pub fn check(&self) -> Result<(), AgentError> {
        if self.budget == 0 {
            return Err(AgentError::InvalidConfig("budget must be at least 1".into()));
        }
        if self.width == 0 {
            return Err(AgentError::InvalidConfig("width must be at least 1".into()));
        }
        self.proposal.utility.weights.check()
    }
}

/// Everything a cycle needs, borrowed from the caller.
pub struct Agent<'a> {
    pub schema: &'a FrameworkSchema,
    pub kb: &'a KnowledgeBase,
    pub llm: &'a dyn LlmBackend,
    pub env: &'a dyn Environment,
    pub prompts: &'a PromptRegistry,
    pub corpus: &'a InfraCorpus,
    pub config: CycleConfig,
}

/// Runs `project` and labels the metrics with the requirement's setting.
pub fn execute(project: &RunnableProject, env: &dyn Environment, evaluation_setting: &str) -> Result<MetricVector, AgentError> {
    if !project.runnable {
        return Err(AgentError::NotRunnable);
    }
    let m = env.execute(project)?;
    Ok(MetricVector::new(evaluation_setting, m.entries)?)
}

impl Agent<'_> {
    /// Analyzes the intention, then runs `budget` iterations of propose,
    /// ground, execute and record.
    pub fn run_cycle(&self, intention: &Intention) -> Result<CycleReport, AgentError> {
        self.config.check()?;
        let mut transcript = Transcript::new();
        let options = AnalysisOptions {
            max_attempts: self.config.analysis_attempts,
            knowledge_k: self.config.knowledge_k,
            ..AnalysisOptions::default()
        };
        let spec = analyze_requirements(intention, self.kb, self.schema, self.llm, self.prompts, &options, &mut transcript)?;
        self.run_with_spec(intention, spec, transcript)
    }

    /// Runs the loop for an already analyzed requirement.
    pub fn run_with_spec(
        &self,
        intention: &Intention,
        spec: RequirementSpec,
        mut transcript: Transcript,
    ) -> Result<CycleReport, AgentError> {
        self.config.check()?;
        for c in &spec.constraints {
            c.predicate.check_references(self.schema)?;
        }
        let proposer = Proposer {
            spec: &spec,
            kb: self.kb,
            schema: self.schema,
            llm: self.llm,
            prompts: self.prompts,
            options: &self.config.proposal,
        };
        let clock = AtomicI64::new(self.kb.experiment_count() as i64);
        let rng = Mutex::new(ChaCha8Rng::seed_from_u64(self.config.seed));
        let mut iterations = Vec::new();
        let mut added: Vec<std::sync::Arc<ExperimentRecord>> = Vec::new();

        for index in 0..self.config.budget {
            let remaining = self.config.budget - index - 1;
            let proposal = match self.config.proposal.policy {
                ProposalPolicy::Utility => proposer.propose(self.config.width, remaining, &mut transcript)?,
                ProposalPolicy::Random => {
                    proposer.propose_random(self.config.width, remaining, &mut rng.lock().expect("lock"))?
                }
            };
            let outcomes = self.run_iteration(&spec, &proposal, &clock, &mut transcript, &mut added)?;
            iterations.push(IterationReport { index, proposal, outcomes });
        }

        let best = best_of(&added, &spec);
        let secondary = secondary_checks(&added, &spec, best.as_ref());
        Ok(CycleReport {
            report_version: REPORT_VERSION,
            intention: intention.clone(),
            spec,
            budget: self.config.budget,
            width: self.config.width,
            policy: self.config.proposal.policy,
            iterations,
            best,
            secondary,
            records_added: added.len(),
            transcript,
        })
    }

    fn run_iteration(
        &self,
        spec: &RequirementSpec,
        proposal: &ProposedExperimentSet,
        clock: &AtomicI64,
        transcript: &mut Transcript,
        added: &mut Vec<std::sync::Arc<ExperimentRecord>>,
    ) -> Result<Vec<ExperimentOutcome>, AgentError> {
        let mut grounded: Vec<(RunnableProject, Vec<SlotGrounding>)> = Vec::new();
        for p in &proposal.experiments {
            let outcome = ground(
                &p.plan,
                self.schema,
                self.kb,
                self.corpus,
                self.llm,
                self.prompts,
                &self.config.grounding,
                transcript,
            )?;
            grounded.push((outcome.project, outcome.slots));
        }

        let results: Vec<Result<MetricVector, String>> = std::thread::scope(|s| {
            let handles: Vec<_> = grounded
                .iter()
                .map(|(project, _)| {
                    s.spawn(move || {
                        if !project.runnable {
                            return Err(format!(
                                "grounding failed at slot `{}`",
                                project.failed_slot.as_deref().unwrap_or("?")
                            ));
                        }
                        execute(project, self.env, &spec.evaluation_setting).map_err(|e| e.to_string())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err("environment panicked".to_string())))
                .collect()
        });

        let mut outcomes = Vec::new();
        for ((project, slots), result) in grounded.into_iter().zip(results) {
            let (results, failure) = match result {
                Ok(m) => (m, None),
                Err(e) => (MetricVector::empty(spec.evaluation_setting.clone()), Some(e)),
            };
            let created_at = match self.config.clock {
                ClockMode::Logical => clock.fetch_add(1, Ordering::SeqCst) + 1,
                ClockMode::Wall => std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_millis() as i64),
            };
            let implementation = (!project.implementation.units.is_empty()).then(|| project.implementation.clone());
            let draft = RecordDraft {
                plan: project.plan.clone(),
                goal: spec.goal_text(),
                results,
                implementation,
                failure,
                created_at,
            };
            let id = self.kb.next_experiment_id();
            let record = ExperimentRecord::from_draft(id, draft, self.schema, self.kb.embedder().as_ref())?;
            self.kb.add_experiment(record.clone())?;
            tracing::debug!(id = %record.id, status = ?record.status, "experiment recorded");
            outcomes.push(ExperimentOutcome {
                experiment_id: record.id.clone(),
                plan: record.plan.render(),
                status: record.status,
                metrics: (record.status == RecordStatus::Succeeded).then(|| record.results.clone()),
                failure: record.failure.clone(),
                grounding: slots,
            });
            added.push(std::sync::Arc::new(record));
        }
        Ok(outcomes)
    }
}

/// The extremal succeeded record; the earliest wins ties.
fn best_of(records: &[std::sync::Arc<ExperimentRecord>], spec: &RequirementSpec) -> Option<BestResult> {
    let mut best: Option<(&ExperimentRecord, f64)> = None;
    for r in records.iter().filter(|r| r.succeeded()) {
        let Some(v) = r.results.get(&spec.target_metric) else { continue };
        if best.is_none_or(|(_, b)| spec.direction.better(v, b)) {
            best = Some((r, v));
        }
    }
    best.map(|(r, _)| BestResult { experiment_id: r.id.clone(), plan: r.plan.clone(), metrics: r.results.clone() })
}

/// Compares each secondary metric at the best record with its value at the
/// first succeeded record of the cycle.
fn secondary_checks(
    records: &[std::sync::Arc<ExperimentRecord>],
    spec: &RequirementSpec,
    best: Option<&BestResult>,
) -> Vec<SecondaryCheck> {
    let (Some(best), Some(first)) = (best, records.iter().find(|r| r.succeeded())) else {
        return Vec::new();
    };
    spec.secondary_targets
        .iter()
        .filter_map(|t| {
            let at_best = best.metrics.get(&t.metric)?;
            let reference = first.results.get(&t.metric)?;
            Some(SecondaryCheck {
                metric: t.metric.clone(),
                direction: t.direction,
                at_best,
                reference,
                degraded: t.direction.better(reference, at_best),
            })
        })
        .collect()
}
