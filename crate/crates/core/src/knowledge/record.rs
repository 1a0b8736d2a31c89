use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::embed::{Embedder, Embedding};
use super::metrics::MetricVector;
use super::KnowledgeError;
use crate::symlang::{ExperimentPlan, FrameworkSchema, ParamValue, SlotKind, SlotPlan};

/// A piece of general knowledge. The key is what gets embedded; the value
/// is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub category: String,
    pub embedding: Embedding,
}

impl KnowledgeItem {
    pub fn new(
        embedder: &dyn Embedder,
        key: impl Into<String>,
        value: Option<String>,
        category: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        let key = key.into();
        let embedding = embedder.embed(&key)?;
        Ok(Self {
            key,
            value,
            category: category.into(),
            embedding,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Succeeded,
    Failed,
}

/// Component texts of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components<T> {
    pub data: T,
    pub model: T,
    pub evaluation: T,
    pub goal: T,
}

impl<T> Components<T> {
    pub fn get(&self, kind: SlotKind) -> &T {
        match kind {
            SlotKind::Data => &self.data,
            SlotKind::Model => &self.model,
            SlotKind::Evaluation => &self.evaluation,
        }
    }

    fn try_map<U, E>(&self, mut f: impl FnMut(&T) -> Result<U, E>) -> Result<Components<U>, E> {
        Ok(Components {
            data: f(&self.data)?,
            model: f(&self.model)?,
            evaluation: f(&self.evaluation)?,
            goal: f(&self.goal)?,
        })
    }

    fn iter(&self) -> impl Iterator<Item = (&'static str, &T)> {
        [
            ("data", &self.data),
            ("model", &self.model),
            ("evaluation", &self.evaluation),
            ("goal", &self.goal),
        ]
        .into_iter()
    }
}

/// The grounded configuration and optional code for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplementationUnit {
    pub kind: SlotKind,
    pub template: String,
    pub config: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ImplementationBundle {
    pub units: IndexMap<String, ImplementationUnit>,
}

/// One executed (or attempted) action together with what came out of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub components: Components<String>,
    pub component_embeddings: Components<Embedding>,
    pub plan_embedding: Embedding,
    pub plan: ExperimentPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<ImplementationBundle>,
    pub results: MetricVector,
    pub status: RecordStatus,
    /// Milliseconds since the Unix epoch, or a logical tick in replay mode.
    pub created_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Everything needed to build a record apart from its id and embeddings.
#[derive(Debug, Clone)]
pub struct RecordDraft {
    pub plan: ExperimentPlan,
    pub goal: String,
    pub results: MetricVector,
    pub implementation: Option<ImplementationBundle>,
    pub failure: Option<String>,
    pub created_at: i64,
}

impl ExperimentRecord {
    pub fn from_draft(
        id: impl Into<String>,
        draft: RecordDraft,
        schema: &FrameworkSchema,
        embedder: &dyn Embedder,
    ) -> Result<Self, KnowledgeError> {
        let components = Components {
            data: draft.plan.render_kind(schema, SlotKind::Data),
            model: draft.plan.render_kind(schema, SlotKind::Model),
            evaluation: draft.plan.render_kind(schema, SlotKind::Evaluation),
            goal: draft.goal,
        };
        let component_embeddings = components.try_map(|t| embedder.embed(t))?;
        let plan_embedding = embedder.embed(&draft.plan.render())?;
        let status = if draft.failure.is_none() && !draft.results.is_empty() {
            RecordStatus::Succeeded
        } else {
            RecordStatus::Failed
        };
        let results = match status {
            RecordStatus::Succeeded => draft.results,
            RecordStatus::Failed => MetricVector::empty(draft.results.evaluation_setting),
        };
        Ok(Self {
            id: id.into(),
            components,
            component_embeddings,
            plan_embedding,
            plan: draft.plan,
            implementation: draft.implementation,
            results,
            status,
            created_at: draft.created_at,
            failure: draft.failure,
        })
    }

    pub fn succeeded(&self) -> bool {
        self.status == RecordStatus::Succeeded
    }

    pub fn slot_plan(&self, slot: &str) -> Option<&SlotPlan> {
        self.plan.slots.get(slot)
    }

    /// Checks record invariants against the store's embedding dimension.
    pub fn check(&self, dim: usize) -> Result<(), KnowledgeError> {
        if self.id.is_empty() {
            return Err(KnowledgeError::InvalidRecord("empty id".into()));
        }
        for (name, e) in self
            .component_embeddings
            .iter()
            .chain(std::iter::once(("plan", &self.plan_embedding)))
        {
            check_embedding(e, dim).map_err(|err| match err {
                KnowledgeError::NotNormalized(n) => {
                    KnowledgeError::InvalidRecord(format!("{name} embedding has norm {n}"))
                }
                other => other,
            })?;
        }
        let has_results = !self.results.is_empty();
        match (self.status, has_results) {
            (RecordStatus::Succeeded, false) => {
                Err(KnowledgeError::InvalidRecord("succeeded record without results".into()))
            }
            (RecordStatus::Failed, true) => {
                Err(KnowledgeError::InvalidRecord("failed record carries results".into()))
            }
            _ => Ok(()),
        }?;
        if let Some((m, v)) = self.results.entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(KnowledgeError::InvalidRecord(format!("metric `{m}` is {v}")));
        }
        Ok(())
    }
}

pub(crate) fn check_embedding(e: &Embedding, dim: usize) -> Result<(), KnowledgeError> {
    if e.dim() != dim {
        return Err(KnowledgeError::DimensionMismatch {
            expected: dim,
            got: e.dim(),
        });
    }
    let norm = e.norm();
    if (norm - 1.0).abs() > super::embed::UNIT_TOLERANCE {
        return Err(KnowledgeError::NotNormalized(norm));
    }
    Ok(())
}
