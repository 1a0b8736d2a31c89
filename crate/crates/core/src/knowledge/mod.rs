//! Persistent store of general knowledge and executed experiments.
//!
//! Everything that goes in is embedded on the way in with the store's
//! configured [`Embedder`]; similarity is cosine over unit vectors. The
//! on-disk form is a directory holding `config` (TOML) plus two JSONL logs,
//! `experiments.log` and `knowledge.log`, that are only ever appended to.

mod config;
mod embed;
mod infra;
mod metrics;
mod record;
mod store;
mod topk;

pub use config::{EmbeddingProvider, KbConfig};
pub use embed::{tokenize, EmbedError, Embedder, Embedding, HashEmbedder, RemoteEmbedder, UNIT_TOLERANCE};
pub use infra::{chunk_text, InfraChunk, InfraCorpus, InfraHit};
pub use metrics::{default_metric_catalog, Direction, Leaderboard, LeaderboardRow, MetricCatalog, MetricVector};
pub use record::{
    Components, ExperimentRecord, ImplementationBundle, ImplementationUnit, KnowledgeItem, RecordDraft, RecordStatus,
};
pub use store::{Demonstration, IdeaCandidate, KnowledgeBase, ScoredExperiment, ScoredItem, RECORD_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{file}:{line}: corrupt record: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error("embedding has dimension {got}, store expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding is not unit length (norm {0})")]
    NotNormalized(f64),
    #[error("experiment id `{0}` already exists")]
    DuplicateId(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("knowledge category must not be empty")]
    EmptyCategory,
    #[error("metric `{0}` is not in the store's catalog")]
    UnknownMetric(String),
    #[error("embedding failed: {0}")]
    Embed(#[from] EmbedError),
    #[error("config error: {0}")]
    Config(String),
}
