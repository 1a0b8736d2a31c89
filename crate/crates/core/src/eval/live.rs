use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::agent::{
    Agent, ClockMode, CycleConfig, CycleReport, Intention, ProposalPolicy, RequirementSpec, Transcript,
};
use crate::knowledge::{ExperimentRecord, InfraCorpus, KbConfig, KnowledgeBase, MetricVector, RecordDraft};
use crate::llm::{Exhaustion, Matcher, PromptRegistry, Script, ScriptedBackend};
use crate::simenv::SimEnv;
use crate::symlang::{enumerate_plans, satisfies_all, ExperimentPlan, FrameworkSchema};

/// Objective scores for one cycle measured against a known optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveScore {
    pub oracle_value: f64,
    /// Best observed target value, if any experiment succeeded.
    pub best_value: Option<f64>,
    /// Direction-adjusted gap between the optimum and the best observed value.
    pub regret: Option<f64>,
    pub experiments: usize,
    pub grounded: usize,
    /// Fraction of experiments whose every slot was grounded.
    pub pass_rate: f64,
    /// Proposed plans that break at least one requirement constraint.
    pub constraint_violations: usize,
    /// One-based iteration at which regret first fell to `epsilon` or below.
    pub iterations_to_epsilon: Option<usize>,
    pub epsilon: f64,
}

/// Scores `report` against the noise-free optimum `oracle`.
pub fn score_live_run(
    report: &CycleReport,
    oracle: &(ExperimentPlan, MetricVector),
    schema: &FrameworkSchema,
    epsilon: f64,
) -> Result<LiveScore, EvalError> {
    let spec = &report.spec;
    let oracle_value = oracle
        .1
        .get(&spec.target_metric)
        .ok_or_else(|| EvalError::Live(format!("oracle has no value for `{}`", spec.target_metric)))?;
    let regret_of = |v: f64| spec.direction.oriented(oracle_value) - spec.direction.oriented(v);
    let predicates = spec.predicates();

    let mut experiments = 0;
    let mut grounded = 0;
    let mut violations = 0;
    let mut best: Option<f64> = None;
    let mut iterations_to_epsilon = None;
    for it in &report.iterations {
        for p in &it.proposal.experiments {
            if !satisfies_all(&p.plan, &predicates, Some(schema)) {
                violations += 1;
            }
        }
        for o in &it.outcomes {
            experiments += 1;
            if !o.grounding.is_empty() && o.grounding.iter().all(|g| g.grounded) {
                grounded += 1;
            }
            if let Some(v) = o.metrics.as_ref().and_then(|m| m.get(&spec.target_metric)) {
                if best.is_none_or(|b| spec.direction.better(v, b)) {
                    best = Some(v);
                }
            }
        }
        if iterations_to_epsilon.is_none() && best.is_some_and(|b| regret_of(b) <= epsilon) {
            iterations_to_epsilon = Some(it.index + 1);
        }
    }
    Ok(LiveScore {
        oracle_value,
        best_value: best,
        regret: best.map(regret_of),
        experiments,
        grounded,
        pass_rate: if experiments == 0 { 0.0 } else { grounded as f64 / experiments as f64 },
        constraint_violations: violations,
        iterations_to_epsilon,
        epsilon,
    })
}

/// A scripted backend that declines to suggest plans and grounds every
/// slot with the planned template and its defaults.
pub fn offline_backend() -> ScriptedBackend {
    let script = Script::new(Exhaustion::Error)
        .push_sticky(
            Matcher::Prompt { name: "propose_experiments".into() },
            r#"{"hypothesis": "", "experiments": []}"#,
        )
        .push_sticky(Matcher::Prompt { name: "ground_slot".into() }, r#"{"config": {}}"#);
    ScriptedBackend::new(script)
}

/// Settings for comparing proposal policies on a simulated surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveProtocol {
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub width: usize,
    pub epsilon: f64,
    pub target_metric: String,
    /// Goal under which the warm-start records were produced.
    pub prior_goal: String,
    pub prior_records: usize,
}

impl Default for LiveProtocol {
    fn default() -> Self {
        Self {
            seeds: (1..=20).collect(),
            budget: 8,
            width: 2,
            epsilon: 0.01,
            target_metric: "excess_return".into(),
            prior_goal: "minimize max_drawdown".into(),
            prior_records: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    /// Utility-driven proposals from an empty knowledge base.
    pub cold: LiveScore,
    /// Uniform random proposals from an empty knowledge base.
    pub random: LiveScore,
    /// Utility-driven proposals over records produced for another goal.
    pub warm: LiveScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveComparison {
    pub protocol: LiveProtocol,
    pub oracle_plan: String,
    pub oracle_value: f64,
    pub runs: Vec<SeedComparison>,
    pub median_regret_utility: f64,
    pub median_regret_random: f64,
    /// Runs that never reach `epsilon` count as `budget + 1` iterations.
    pub median_iterations_cold: f64,
    pub median_iterations_warm: f64,
}

impl LiveComparison {
    pub fn utility_beats_random(&self) -> bool {
        self.median_regret_utility <= self.median_regret_random
    }

    pub fn warm_no_later_than_cold(&self) -> bool {
        self.median_iterations_warm <= self.median_iterations_cold
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "Optimum {} = {:.4}: {}\n{:>5} {:>12} {:>12} {:>12} {:>6} {:>6}\n",
            self.protocol.target_metric,
            self.oracle_value,
            self.oracle_plan,
            "seed",
            "regret:util",
            "regret:rand",
            "regret:warm",
            "it:cold",
            "it:warm"
        );
        let fmt = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.4}"));
        let it = |i: Option<usize>| i.map_or("-".to_string(), |v| v.to_string());
        for r in &self.runs {
            s.push_str(&format!(
                "{:>5} {:>12} {:>12} {:>12} {:>6} {:>6}\n",
                r.seed,
                fmt(r.cold.regret),
                fmt(r.random.regret),
                fmt(r.warm.regret),
                it(r.cold.iterations_to_epsilon),
                it(r.warm.iterations_to_epsilon)
            ));
        }
        s.push_str(&format!(
            "median regret: utility {:.4}, random {:.4}\nmedian iterations to epsilon {}: cold {}, warm {}\n",
            self.median_regret_utility,
            self.median_regret_random,
            self.protocol.epsilon,
            self.median_iterations_cold,
            self.median_iterations_warm
        ));
        s
    }
}

/// Runs cold, random and warm cycles on `env` for every seed of the
/// protocol. Each seed reseeds the surface noise, the random policy and
/// the choice of warm-start records.
pub fn compare_policies(env: &SimEnv, protocol: &LiveProtocol) -> Result<LiveComparison, EvalError> {
    let schema = env.schema();
    let direction = env
        .surface()
        .metrics
        .get(&protocol.target_metric)
        .ok_or_else(|| EvalError::Live(format!("surface has no metric `{}`", protocol.target_metric)))?
        .direction;
    let setting = env.surface().evaluation_setting.clone();
    let spec = RequirementSpec::new(protocol.target_metric.clone(), direction, setting);
    let oracle = env.best_action(&spec.predicates(), &protocol.target_metric)?;
    let prompts = PromptRegistry::bundled();
    let intention = Intention::new("live", spec.goal_text())?;

    let mut runs = Vec::new();
    for &seed in &protocol.seeds {
        let env = env.clone().with_seed(seed);
        let run = |policy: ProposalPolicy, kb: &KnowledgeBase| -> Result<LiveScore, EvalError> {
            let corpus = InfraCorpus::from_schema(schema, kb.embedder().as_ref(), kb.config().chunk_chars)?;
            let llm = offline_backend();
            let mut config = CycleConfig { budget: protocol.budget, width: protocol.width, seed, clock: ClockMode::Logical, ..CycleConfig::default() };
            config.proposal.policy = policy;
            let agent = Agent { schema, kb, llm: &llm, env: &env, prompts: &prompts, corpus: &corpus, config };
            let report = agent.run_with_spec(&intention, spec.clone(), Transcript::new())?;
            score_live_run(&report, &oracle, schema, protocol.epsilon)
        };
        let cold = run(ProposalPolicy::Utility, &fresh_kb(schema)?)?;
        let random = run(ProposalPolicy::Random, &fresh_kb(schema)?)?;
        let warm_kb = fresh_kb(schema)?;
        seed_prior_records(&warm_kb, &env, &oracle.0, protocol, seed)?;
        let warm = run(ProposalPolicy::Utility, &warm_kb)?;
        tracing::debug!(seed, ?cold.regret, ?random.regret, ?warm.regret, "policies compared");
        runs.push(SeedComparison { seed, cold, random, warm });
    }

    let regrets = |f: fn(&SeedComparison) -> &LiveScore| -> Vec<f64> {
        runs.iter().map(|r| f(r).regret.unwrap_or(f64::INFINITY)).collect()
    };
    let iterations = |f: fn(&SeedComparison) -> &LiveScore| -> Vec<f64> {
        runs.iter().map(|r| f(r).iterations_to_epsilon.map_or(protocol.budget as f64 + 1.0, |i| i as f64)).collect()
    };
    Ok(LiveComparison {
        oracle_plan: oracle.0.render(),
        oracle_value: oracle.1.get(&protocol.target_metric).unwrap_or(f64::NAN),
        median_regret_utility: median(regrets(|r| &r.cold)),
        median_regret_random: median(regrets(|r| &r.random)),
        median_iterations_cold: median(iterations(|r| &r.cold)),
        median_iterations_warm: median(iterations(|r| &r.warm)),
        runs,
        protocol: protocol.clone(),
    })
}

fn fresh_kb(schema: &FrameworkSchema) -> Result<KnowledgeBase, EvalError> {
    Ok(KnowledgeBase::in_memory(KbConfig::default())?.with_schema(Arc::new(schema.clone())))
}

/// Stores executed records for another goal. The optimum is left out so
/// the warm cycle still has to find it.
fn seed_prior_records(
    kb: &KnowledgeBase,
    env: &SimEnv,
    optimum: &ExperimentPlan,
    protocol: &LiveProtocol,
    seed: u64,
) -> Result<(), EvalError> {
    let schema = env.schema();
    let optimum_key = optimum.render();
    let grid: Vec<ExperimentPlan> =
        enumerate_plans(schema, &[], None).into_iter().filter(|p| p.render() != optimum_key).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let n = protocol.prior_records.min(grid.len());
    let mut picks = sample(&mut rng, grid.len(), n).into_vec();
    picks.sort_unstable();
    for (tick, i) in picks.into_iter().enumerate() {
        let plan = grid[i].clone();
        let results = env.evaluate_plan(&plan)?.metrics;
        let draft = RecordDraft {
            plan,
            goal: protocol.prior_goal.clone(),
            results,
            implementation: None,
            failure: None,
            created_at: tick as i64 + 1,
        };
        let record = ExperimentRecord::from_draft(kb.next_experiment_id(), draft, schema, kb.embedder().as_ref())?;
        kb.add_experiment(record)?;
    }
    Ok(())
}

pub fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

