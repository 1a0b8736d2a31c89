use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::config::KbConfig;
use super::embed::{Embedder, Embedding};
use super::infra::{InfraCorpus, InfraHit};
use super::metrics::{Direction, Leaderboard};
use super::record::{check_embedding, ExperimentRecord, ImplementationUnit, KnowledgeItem};
use super::topk::top_k;
use super::KnowledgeError;
use crate::symlang::{diff_plans, satisfies_all, ComponentPredicate, FrameworkSchema, PlanDelta, SlotPlan, SubTask};

pub const RECORD_VERSION: u32 = 1;
const EXPERIMENTS_LOG: &str = "experiments.log";
const KNOWLEDGE_LOG: &str = "knowledge.log";
const CONFIG_FILE: &str = "config";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub similarity: f64,
    pub item: KnowledgeItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExperiment {
    pub similarity: f64,
    pub record: Arc<ExperimentRecord>,
}

/// A prior implementation of a slot, offered as an in-context example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub experiment_id: String,
    pub slot: String,
    pub plan_fragment: SlotPlan,
    pub unit: ImplementationUnit,
    pub similarity: f64,
}

/// A plan difference between two experiments that ended far apart on a
/// shared leaderboard. `delta` goes from the worse to the better plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaCandidate {
    pub delta: PlanDelta,
    /// (worse experiment, better experiment)
    pub source_pair: (String, String),
    pub evaluation_setting: String,
    pub metric: String,
    pub gap: f64,
    pub novelty: f64,
}

#[derive(Serialize, Deserialize)]
struct ExperimentLine {
    record_version: u32,
    experiment: ExperimentRecord,
}

#[derive(Serialize, Deserialize)]
struct KnowledgeLine {
    record_version: u32,
    id: String,
    item: KnowledgeItem,
}

#[derive(Default)]
struct Inner {
    items: Vec<(String, KnowledgeItem)>,
    records: Vec<Arc<ExperimentRecord>>,
    by_id: HashMap<String, usize>,
    leaderboards: BTreeMap<(String, String), Leaderboard>,
    logs: Option<Logs>,
}

struct Logs {
    experiments: File,
    knowledge: File,
}

/// The append-only R&D knowledge base.
///
/// Readers take a shared lock and get owned snapshots back; writes are
/// serialized and hit the log before the in-memory index.
pub struct KnowledgeBase {
    config: KbConfig,
    embedder: Arc<dyn Embedder>,
    schema: Option<Arc<FrameworkSchema>>,
    dir: Option<PathBuf>,
    inner: RwLock<Inner>,
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("dir", &self.dir)
            .field("provider", &self.embedder.provider())
            .finish_non_exhaustive()
    }
}

impl KnowledgeBase {
    pub fn in_memory(config: KbConfig) -> Result<Self, KnowledgeError> {
        let embedder = config.embedder()?;
        Ok(Self::with_embedder(config, embedder))
    }

    pub fn with_embedder(config: KbConfig, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            config,
            embedder,
            schema: None,
            dir: None,
            inner: RwLock::new(Inner::default()),
        }
    }

    /// Creates `dir` with `config` if it holds no store yet, then opens it.
    pub fn open_or_create(dir: impl AsRef<Path>, config: KbConfig) -> Result<Self, KnowledgeError> {
        let dir = dir.as_ref();
        if !dir.join(CONFIG_FILE).exists() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            std::fs::write(dir.join(CONFIG_FILE), config.to_toml()).map_err(|e| io_err(dir, e))?;
        }
        Self::open(dir)
    }

    /// Opens an existing store and rebuilds the index from its logs.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let dir = dir.as_ref();
        let config = KbConfig::load(&dir.join(CONFIG_FILE))?;
        let embedder = config.embedder()?;
        let kb = Self {
            config,
            embedder,
            schema: None,
            dir: Some(dir.to_path_buf()),
            inner: RwLock::new(Inner::default()),
        };
        {
            let mut inner = kb.inner.write().expect("lock");
            for line in read_log::<KnowledgeLine>(&dir.join(KNOWLEDGE_LOG))? {
                check_embedding(&line.item.embedding, kb.config.embedding_dim)?;
                inner.items.push((line.id, line.item));
            }
            for line in read_log::<ExperimentLine>(&dir.join(EXPERIMENTS_LOG))? {
                kb.index_record(&mut inner, Arc::new(line.experiment))?;
            }
            inner.logs = Some(Logs {
                experiments: append_file(&dir.join(EXPERIMENTS_LOG))?,
                knowledge: append_file(&dir.join(KNOWLEDGE_LOG))?,
            });
        }
        Ok(kb)
    }

    /// Attaches a schema so tag predicates can consult template tags.
    pub fn with_schema(mut self, schema: Arc<FrameworkSchema>) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn config(&self) -> &KbConfig {
        &self.config
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn embed(&self, text: &str) -> Result<Embedding, KnowledgeError> {
        Ok(self.embedder.embed(text)?)
    }

    pub fn direction(&self, metric: &str) -> Option<Direction> {
        self.config.metrics.get(metric).copied()
    }

    // ------------------------------------------------------------ general knowledge

    pub fn put_knowledge(&self, item: KnowledgeItem) -> Result<String, KnowledgeError> {
        check_embedding(&item.embedding, self.config.embedding_dim)?;
        if item.category.trim().is_empty() {
            return Err(KnowledgeError::EmptyCategory);
        }
        let mut inner = self.inner.write().expect("lock");
        let id = format!("k-{:06}", inner.items.len() + 1);
        if let Some(logs) = inner.logs.as_mut() {
            write_line(
                &mut logs.knowledge,
                &KnowledgeLine {
                    record_version: RECORD_VERSION,
                    id: id.clone(),
                    item: item.clone(),
                },
            )?;
        }
        inner.items.push((id.clone(), item));
        Ok(id)
    }

    /// Embeds `key` with the store's embedder and stores the item.
    pub fn put_text(&self, key: &str, value: Option<&str>, category: &str) -> Result<String, KnowledgeError> {
        let item = KnowledgeItem::new(self.embedder.as_ref(), key, value.map(str::to_string), category)?;
        self.put_knowledge(item)
    }

    pub fn query_general(&self, query: &str, category: &str, k: usize) -> Result<Vec<ScoredItem>, KnowledgeError> {
        require_k(k)?;
        let q = self.embed(query)?;
        let inner = self.inner.read().expect("lock");
        Ok(top_k(
            inner
                .items
                .iter()
                .enumerate()
                .filter(|(_, (_, it))| it.category == category)
                .map(|(seq, (id, it))| (q.cosine(&it.embedding), seq, (id, it))),
            k,
        )
        .into_iter()
        .map(|(similarity, (id, item))| ScoredItem {
            id: id.clone(),
            similarity,
            item: item.clone(),
        })
        .collect())
    }

    pub fn knowledge_count(&self) -> usize {
        self.inner.read().expect("lock").items.len()
    }

    // ------------------------------------------------------------ experiments

    pub fn next_experiment_id(&self) -> String {
        format!("exp-{:06}", self.inner.read().expect("lock").records.len() + 1)
    }

    pub fn add_experiment(&self, record: ExperimentRecord) -> Result<String, KnowledgeError> {
        record.check(self.config.embedding_dim)?;
        let mut inner = self.inner.write().expect("lock");
        if inner.by_id.contains_key(&record.id) {
            return Err(KnowledgeError::DuplicateId(record.id));
        }
        if let Some(logs) = inner.logs.as_mut() {
            write_line(
                &mut logs.experiments,
                &ExperimentLine {
                    record_version: RECORD_VERSION,
                    experiment: record.clone(),
                },
            )?;
        }
        let id = record.id.clone();
        self.index_record(&mut inner, Arc::new(record))?;
        Ok(id)
    }

    fn index_record(&self, inner: &mut Inner, record: Arc<ExperimentRecord>) -> Result<(), KnowledgeError> {
        record.check(self.config.embedding_dim)?;
        if inner.by_id.contains_key(&record.id) {
            return Err(KnowledgeError::DuplicateId(record.id.clone()));
        }
        if record.succeeded() {
            let setting = &record.results.evaluation_setting;
            for (metric, value) in &record.results.entries {
                let Some(direction) = self.direction(metric) else {
                    continue;
                };
                inner
                    .leaderboards
                    .entry((setting.clone(), metric.clone()))
                    .or_insert_with(|| Leaderboard::new(setting, metric, direction))
                    .insert(&record.id, *value);
            }
        }
        inner.by_id.insert(record.id.clone(), inner.records.len());
        inner.records.push(record);
        Ok(())
    }

    pub fn experiment(&self, id: &str) -> Option<Arc<ExperimentRecord>> {
        let inner = self.inner.read().expect("lock");
        inner.by_id.get(id).map(|i| inner.records[*i].clone())
    }

    /// All records in insertion order.
    pub fn experiments(&self) -> Vec<Arc<ExperimentRecord>> {
        self.inner.read().expect("lock").records.clone()
    }

    pub fn experiment_count(&self) -> usize {
        self.inner.read().expect("lock").records.len()
    }

    pub fn leaderboard(&self, evaluation_setting: &str, metric: &str) -> Option<Leaderboard> {
        self.inner
            .read()
            .expect("lock")
            .leaderboards
            .get(&(evaluation_setting.to_string(), metric.to_string()))
            .cloned()
    }

    pub fn leaderboards(&self) -> Vec<Leaderboard> {
        self.inner.read().expect("lock").leaderboards.values().cloned().collect()
    }

    fn matches(&self, record: &ExperimentRecord, constraints: &[ComponentPredicate]) -> bool {
        satisfies_all(&record.plan, constraints, self.schema.as_deref())
    }

    /// Records meeting every constraint, ranked by goal similarity.
    pub fn query_experiments(
        &self,
        goal: &str,
        constraints: &[ComponentPredicate],
        k: usize,
    ) -> Result<Vec<ScoredExperiment>, KnowledgeError> {
        require_k(k)?;
        let q = self.embed(goal)?;
        let inner = self.inner.read().expect("lock");
        Ok(top_k(
            inner
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| self.matches(r, constraints))
                .map(|(seq, r)| (q.cosine(&r.component_embeddings.goal), seq, r)),
            k,
        )
        .into_iter()
        .map(|(similarity, r)| ScoredExperiment {
            similarity,
            record: r.clone(),
        })
        .collect())
    }

    /// Pairs of constraint-matching succeeded experiments on a shared
    /// `metric` leaderboard, ranked by gap, then novelty, then source ids.
    pub fn propose_idea_candidates(
        &self,
        metric: &str,
        constraints: &[ComponentPredicate],
        k: usize,
    ) -> Result<Vec<IdeaCandidate>, KnowledgeError> {
        require_k(k)?;
        let direction = self
            .direction(metric)
            .ok_or_else(|| KnowledgeError::UnknownMetric(metric.to_string()))?;
        let records = self.experiments();
        let matching: Vec<(&Arc<ExperimentRecord>, f64)> = records
            .iter()
            .filter(|r| r.succeeded() && self.matches(r, constraints))
            .filter_map(|r| r.results.get(metric).map(|v| (r, v)))
            .collect();
        if matching.len() < 2 {
            return Ok(Vec::new());
        }

        let mut rendered: HashMap<String, f64> = HashMap::new();
        let mut out = Vec::new();
        for (i, (a, va)) in matching.iter().enumerate() {
            for (b, vb) in &matching[i + 1..] {
                if a.results.evaluation_setting != b.results.evaluation_setting {
                    continue;
                }
                let (worse, better) = if direction.better(*vb, *va) || va == vb { (a, b) } else { (b, a) };
                let delta = diff_plans(&worse.plan, &better.plan).map_err(|e| KnowledgeError::InvalidRecord(e.to_string()))?;
                if delta.is_empty() {
                    continue;
                }
                let text = delta.render();
                let novelty = match rendered.get(&text) {
                    Some(n) => *n,
                    None => {
                        let e = self.embed(&text)?;
                        let max_sim = records
                            .iter()
                            .map(|r| e.cosine(&r.plan_embedding))
                            .fold(f64::NEG_INFINITY, f64::max);
                        let n = (1.0 - max_sim).clamp(0.0, 1.0);
                        rendered.insert(text, n);
                        n
                    }
                };
                out.push(IdeaCandidate {
                    delta,
                    source_pair: (worse.id.clone(), better.id.clone()),
                    evaluation_setting: a.results.evaluation_setting.clone(),
                    metric: metric.to_string(),
                    gap: (va - vb).abs(),
                    novelty,
                });
            }
        }
        out.sort_by(|x, y| {
            y.gap
                .total_cmp(&x.gap)
                .then(y.novelty.total_cmp(&x.novelty))
                .then_with(|| x.source_pair.cmp(&y.source_pair))
        });
        out.truncate(k);
        Ok(out)
    }

    /// Prior successful implementations for the subtask's slot kind.
    pub fn query_demonstrations(&self, subtask: &SubTask, k: usize) -> Result<Vec<Demonstration>, KnowledgeError> {
        require_k(k)?;
        let q = self.embed(&subtask.slot_plan.render())?;
        let inner = self.inner.read().expect("lock");
        let mut seq = 0usize;
        let mut candidates = Vec::new();
        for r in inner.records.iter().filter(|r| r.succeeded()) {
            let Some(bundle) = &r.implementation else { continue };
            let sim = q.cosine(r.component_embeddings.get(subtask.kind));
            for (slot, unit) in bundle.units.iter().filter(|(_, u)| u.kind == subtask.kind) {
                let Some(fragment) = r.plan.slots.get(slot) else { continue };
                candidates.push((sim, seq, (r, slot, fragment, unit)));
                seq += 1;
            }
        }
        Ok(top_k(candidates, k)
            .into_iter()
            .map(|(similarity, (r, slot, fragment, unit))| Demonstration {
                experiment_id: r.id.clone(),
                slot: slot.clone(),
                plan_fragment: fragment.clone(),
                unit: unit.clone(),
                similarity,
            })
            .collect())
    }

    pub fn query_infrastructure(&self, query: &str, corpus: &InfraCorpus, k: usize) -> Result<Vec<InfraHit>, KnowledgeError> {
        require_k(k)?;
        if corpus.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.embed(query)?;
        Ok(corpus.search(&q, k))
    }
}

fn require_k(k: usize) -> Result<(), KnowledgeError> {
    if k == 0 {
        Err(KnowledgeError::InvalidK)
    } else {
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> KnowledgeError {
    KnowledgeError::Io(format!("{}: {e}", path.display()))
}

fn append_file(path: &Path) -> Result<File, KnowledgeError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))
}

fn write_line<T: Serialize>(file: &mut File, value: &T) -> Result<(), KnowledgeError> {
    let mut line = serde_json::to_string(value).map_err(|e| KnowledgeError::Io(e.to_string()))?;
    line.push('\n');
    file.write_all(line.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| KnowledgeError::Io(e.to_string()))
}

/// Reads one JSON value per line. A final line without its terminating
/// newline is an interrupted append and is skipped.
fn read_log<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, KnowledgeError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            tracing::warn!(path = %path.display(), line = line_no, "skipping torn trailing record");
            break;
        }
        if buf.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&buf).map_err(|e| corrupt(path, line_no, e.to_string()))?;
        match value.get("record_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(RECORD_VERSION) => {}
            other => return Err(corrupt(path, line_no, format!("unsupported record_version {other:?}"))),
        }
        out.push(serde_json::from_value(value).map_err(|e| corrupt(path, line_no, e.to_string()))?);
    }
    Ok(out)
}

fn corrupt(path: &Path, line: usize, message: String) -> KnowledgeError {
    KnowledgeError::Corrupt {
        file: path.display().to_string(),
        line,
        message,
    }
}
