use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::agent::{EnvError, Environment, RunnableProject};
use crate::knowledge::{Direction, MetricVector};
use crate::symlang::{enumerate_plans, ComponentPredicate, ExperimentPlan, FrameworkSchema};

pub const SURFACE_VERSION: u32 = 1;
const GENERATOR: &str = "chacha8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub direction: Direction,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default = "one")]
    pub noise_weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub features: [String; 2],
    #[serde(flatten)]
    pub effects: BTreeMap<String, f64>,
}

/// An additive response model with pairwise interactions and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSurface {
    pub surface_version: u32,
    pub seed: u64,
    /// Standard deviation of the noise before per-metric weighting.
    pub noise: f64,
    pub generator: String,
    pub evaluation_setting: String,
    pub metrics: BTreeMap<String, MetricModel>,
    /// Template name → metric → effect. Every template that may be
    /// evaluated needs an entry, even an empty one.
    pub templates: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub modifiers: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

/// One named contribution to a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTerm {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedMetric {
    pub intercept: f64,
    pub base: Vec<TraceTerm>,
    pub modifiers: Vec<TraceTerm>,
    pub interactions: Vec<TraceTerm>,
    pub noise: f64,
}

impl TracedMetric {
    /// Sum of the parts, in a fixed order.
    pub fn total(&self) -> f64 {
        self.deterministic() + self.noise
    }

    /// The noise-free part.
    pub fn deterministic(&self) -> f64 {
        let mut v = self.intercept;
        for t in self.base.iter().chain(&self.modifiers).chain(&self.interactions) {
            v += t.value;
        }
        v
    }
}

pub type SimTrace = BTreeMap<String, TracedMetric>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub metrics: MetricVector,
    pub trace: SimTrace,
}

impl ResponseSurface {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let s: Self = toml::from_str(text).map_err(|e| SimError::Surface(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn demo() -> Self {
        Self::from_toml_str(crate::assets::DEMO_SURFACE).expect("bundled surface is valid")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("surface serializes")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Surface(m));
        if self.surface_version != SURFACE_VERSION {
            return bad(format!("unsupported surface_version {}", self.surface_version));
        }
        if self.generator != GENERATOR {
            return bad(format!("unsupported generator `{}`", self.generator));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise must be finite and non-negative, got {}", self.noise));
        }
        if self.metrics.is_empty() {
            return bad("no metrics declared".into());
        }
        for (name, m) in &self.metrics {
            if !(m.intercept.is_finite() && m.noise_weight.is_finite() && m.noise_weight >= 0.0) {
                return bad(format!("metric `{name}` has a non-finite intercept or weight"));
            }
        }
        let tables = self
            .templates
            .iter()
            .map(|(k, v)| (k, v))
            .chain(self.modifiers.iter())
            .chain(self.interactions.iter().map(|i| (&i.features[0], &i.effects)));
        for (feature, effects) in tables {
            for (metric, v) in effects {
                if !self.metrics.contains_key(metric) {
                    return bad(format!("`{feature}` has an effect on undeclared metric `{metric}`"));
                }
                if !v.is_finite() {
                    return bad(format!("`{feature}` has a non-finite effect on `{metric}`"));
                }
            }
        }
        Ok(())
    }

    /// Features of a project: each slot's template, and each configured
    /// parameter as `Template.parameter=value`.
    pub fn features(project: &RunnableProject) -> (Vec<String>, Vec<String>) {
        let mut templates = Vec::new();
        let mut params = Vec::new();
        for unit in project.implementation.units.values() {
            templates.push(unit.template.clone());
            for (k, v) in &unit.config {
                params.push(format!("{}.{k}={}", unit.template, v.render()));
            }
        }
        (templates, params)
    }

    pub fn evaluate(&self, project: &RunnableProject) -> Result<SimResult, SimError> {
        if !project.runnable {
            return Err(SimError::NotRunnable);
        }
        let (templates, params) = Self::features(project);
        if let Some(t) = templates.iter().find(|t| !self.templates.contains_key(*t)) {
            return Err(SimError::UnknownTemplate(t.clone()));
        }
        let present: BTreeSet<&str> = templates.iter().chain(&params).map(String::as_str).collect();
        let key = project.render();

        let mut trace = SimTrace::new();
        let mut entries = BTreeMap::new();
        for (metric, model) in &self.metrics {
            let terms = |features: &[String], table: &BTreeMap<String, BTreeMap<String, f64>>| -> Vec<TraceTerm> {
                features
                    .iter()
                    .filter_map(|f| {
                        table
                            .get(f)
                            .and_then(|e| e.get(metric))
                            .map(|v| TraceTerm { feature: f.clone(), value: *v })
                    })
                    .collect()
            };
            let interactions = self
                .interactions
                .iter()
                .filter(|i| i.features.iter().all(|f| present.contains(f.as_str())))
                .filter_map(|i| {
                    i.effects.get(metric).map(|v| TraceTerm {
                        feature: format!("{} x {}", i.features[0], i.features[1]),
                        value: *v,
                    })
                })
                .collect();
            let sd = self.noise * model.noise_weight;
            let noise = if sd > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(self.seed, metric, &key));
                Normal::new(0.0, sd).expect("finite sd").sample(&mut rng)
            } else {
                0.0
            };
            let t = TracedMetric {
                intercept: model.intercept,
                base: terms(&templates, &self.templates),
                modifiers: terms(&params, &self.modifiers),
                interactions,
                noise,
            };
            entries.insert(metric.clone(), t.total());
            trace.insert(metric.clone(), t);
        }
        let metrics = MetricVector::new(self.evaluation_setting.clone(), entries)
            .map_err(|e| SimError::Surface(e.to_string()))?;
        Ok(SimResult { metrics, trace })
    }
}

fn noise_seed(seed: u64, metric: &str, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(metric.as_bytes());
    h.update([0]);
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// A surface bound to the schema whose plans it evaluates.
#[derive(Debug, Clone)]
pub struct SimEnv {
    schema: FrameworkSchema,
    surface: ResponseSurface,
}

impl SimEnv {
    pub fn new(schema: FrameworkSchema, surface: ResponseSurface) -> Self {
        Self { schema, surface }
    }

    pub fn demo() -> Self {
        Self::new(FrameworkSchema::demo(), ResponseSurface::demo())
    }

    pub fn schema(&self) -> &FrameworkSchema {
        &self.schema
    }

    pub fn surface(&self) -> &ResponseSurface {
        &self.surface
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.surface.seed = seed;
        self
    }

    pub fn evaluate(&self, project: &RunnableProject) -> Result<SimResult, SimError> {
        self.surface.evaluate(project)
    }

    /// Evaluates a plan implemented straight from the schema defaults.
    pub fn evaluate_plan(&self, plan: &ExperimentPlan) -> Result<SimResult, SimError> {
        self.evaluate(&RunnableProject::from_plan(plan, &self.schema))
    }

    /// The noise-free optimum of `metric` over the constrained grid. Ties
    /// go to the plan enumerated first.
    pub fn best_action(
        &self,
        constraints: &[ComponentPredicate],
        metric: &str,
    ) -> Result<(ExperimentPlan, MetricVector), SimError> {
        let direction = self
            .surface
            .metrics
            .get(metric)
            .ok_or_else(|| SimError::UnknownMetric(metric.to_string()))?
            .direction;
        let quiet = self.surface.clone().with_noise(0.0);
        let mut best: Option<(ExperimentPlan, MetricVector, f64)> = None;
        for plan in enumerate_plans(&self.schema, constraints, None) {
            let r = quiet.evaluate(&RunnableProject::from_plan(&plan, &self.schema))?;
            let v = r.metrics.get(metric).expect("declared metric present");
            if best.as_ref().is_none_or(|b| direction.better(v, b.2)) {
                best = Some((plan, r.metrics, v));
            }
        }
        best.map(|(p, m, _)| (p, m)).ok_or(SimError::EmptyGrid)
    }
}

impl Environment for SimEnv {
    fn name(&self) -> &str {
        "simenv"
    }

    fn execute(&self, project: &RunnableProject) -> Result<MetricVector, EnvError> {
        self.evaluate(project).map(|r| r.metrics).map_err(|e| match e {
            SimError::NotRunnable => EnvError::NotRunnable,
            SimError::UnknownTemplate(t) => EnvError::Unknown(format!("template `{t}`")),
            other => EnvError::Failed(other.to_string()),
        })
    }
}
