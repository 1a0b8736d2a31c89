#![allow(dead_code)]

pub mod oracle;
pub mod persist;
pub mod stub;

use std::collections::BTreeMap;

use arda::knowledge::{
    Embedder, ExperimentRecord, HashEmbedder, ImplementationBundle, ImplementationUnit, MetricVector, RecordDraft,
};
use arda::symlang::{enumerate_plans, ExperimentPlan, FrameworkSchema, SlotPlan};
use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "excess", "return", "drawdown", "sharpe", "MinMaxNorm", "LSTM", "factor", "momentum", "CSRankNorm", "GPU",
    "tree", "interpretable", "backtest", "us", "market", "volatility", "rank", "hidden", "size", "normalization",
];

pub const SETTINGS: &[&str] = &["csi300-daily", "us-daily"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A short phrase drawn from a small vocabulary so exact duplicates occur.
pub fn phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn grid(schema: &FrameworkSchema) -> Vec<ExperimentPlan> {
    enumerate_plans(schema, &[], None)
}

/// A random record over the demo grid. About one in ten fails.
pub fn random_record(
    rng: &mut ChaCha8Rng,
    id: &str,
    schema: &FrameworkSchema,
    plans: &[ExperimentPlan],
    embedder: &dyn Embedder,
) -> ExperimentRecord {
    let plan = plans.choose(rng).unwrap().clone();
    let setting = *SETTINGS.choose(rng).unwrap();
    let failed = rng.random_bool(0.1);
    let results = if failed {
        MetricVector::empty(setting)
    } else {
        let mut m = BTreeMap::new();
        // Rounded so that equal values (and equal gaps) show up.
        m.insert("excess_return".to_string(), (rng.random_range(0..20) as f64) / 100.0);
        m.insert("max_drawdown".to_string(), (rng.random_range(0..10) as f64) / 50.0);
        MetricVector::new(setting, m).unwrap()
    };
    let implementation = (!failed).then(|| bundle_for(&plan, schema));
    let draft = RecordDraft {
        goal: phrase(rng),
        plan,
        results,
        implementation,
        failure: failed.then(|| "execution error".to_string()),
        created_at: 0,
    };
    ExperimentRecord::from_draft(id, draft, schema, embedder).unwrap()
}

pub fn bundle_for(plan: &ExperimentPlan, schema: &FrameworkSchema) -> ImplementationBundle {
    let mut units = IndexMap::new();
    for slot in schema.slots() {
        let sp = &plan.slots[&slot.name];
        units.insert(
            slot.name.clone(),
            ImplementationUnit {
                kind: slot.kind,
                template: sp.template.clone(),
                config: sp.parameters.clone(),
                code: None,
            },
        );
    }
    ImplementationBundle { units }
}

pub fn demo_plan(schema: &FrameworkSchema, norm: &str, model: &str, market: &str) -> ExperimentPlan {
    ExperimentPlan::new(schema, "model")
        .with_slot("datahandler", SlotPlan::new("Alpha158").with("normalization", norm))
        .with_slot("model", SlotPlan::new(model))
        .with_slot("evaluation", SlotPlan::new("backtest").with("market", market))
}

pub fn metrics(setting: &str, pairs: &[(&str, f64)]) -> MetricVector {
    MetricVector::new(setting, pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()).unwrap()
}

pub fn record(
    id: &str,
    schema: &FrameworkSchema,
    plan: ExperimentPlan,
    goal: &str,
    results: MetricVector,
) -> ExperimentRecord {
    let implementation = Some(bundle_for(&plan, schema));
    let draft = RecordDraft {
        plan,
        goal: goal.to_string(),
        results,
        implementation,
        failure: None,
        created_at: 0,
    };
    ExperimentRecord::from_draft(id, draft, schema, &HashEmbedder::default()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s.clamp(-1.0, 1.0)
}


/// Everything an agent borrows, built around the demo schema and surface.
pub struct Stack {
    pub schema: FrameworkSchema,
    pub kb: arda::knowledge::KnowledgeBase,
    pub env: arda::simenv::SimEnv,
    pub prompts: arda::llm::PromptRegistry,
    pub corpus: arda::knowledge::InfraCorpus,
}

impl Stack {
    pub fn demo() -> Self {
        let schema = FrameworkSchema::demo();
        let kb = arda::knowledge::KnowledgeBase::in_memory(arda::knowledge::KbConfig::default())
            .unwrap()
            .with_schema(std::sync::Arc::new(schema.clone()));
        let corpus = arda::knowledge::InfraCorpus::from_schema(&schema, kb.embedder().as_ref(), 480).unwrap();
        Self { schema, kb, env: arda::simenv::SimEnv::demo(), prompts: arda::llm::PromptRegistry::bundled(), corpus }
    }

    pub fn agent<'a>(
        &'a self,
        llm: &'a dyn arda::llm::LlmBackend,
        config: arda::agent::CycleConfig,
    ) -> arda::agent::Agent<'a> {
        arda::agent::Agent {
            schema: &self.schema,
            kb: &self.kb,
            llm,
            env: &self.env,
            prompts: &self.prompts,
            corpus: &self.corpus,
            config,
        }
    }

    /// Stores a succeeded record of `plan` under `goal`.
    pub fn seed(&self, plan: ExperimentPlan, goal: &str, results: MetricVector) -> String {
        let id = self.kb.next_experiment_id();
        self.kb.add_experiment(record(&id, &self.schema, plan, goal, results)).unwrap()
    }
}

pub fn logical(budget: usize, width: usize, seed: u64) -> arda::agent::CycleConfig {
    arda::agent::CycleConfig {
        budget,
        width,
        seed,
        clock: arda::agent::ClockMode::Logical,
        ..Default::default()
    }
}
