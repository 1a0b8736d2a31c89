//! Benchmark fixtures, score-sheet aggregation, and objective scoring of
//! live cycles on the simulated environment.

mod aggregate;
mod fixtures;
mod live;

use thiserror::Error;

pub use aggregate::{
    aggregate_all, aggregate_ee, aggregate_grounding, aggregate_transferability, aggregate_understanding, overall,
    AggregateReport, ColdRow, EeWeights, Reproduced, SheetAverage, Tolerances, WarmRow,
};
pub use fixtures::{
    bundled_fixture_files, EvalTask, Fixtures, Phase, PrintedCold, PrintedTables, PrintedWarm, Scenario, ScoreSheet,
    FIXTURE_VERSION, MANIFEST_FILE,
};
pub use live::{
    compare_policies, median, offline_backend, score_live_run, LiveComparison, LiveProtocol, LiveScore, SeedComparison,
};

use crate::agent::AgentError;
use crate::knowledge::KnowledgeError;
use crate::simenv::SimError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checksum mismatch for fixture `{file}`: expected {expected}, found {actual}")]
    Checksum { file: String, expected: String, actual: String },
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("score sheet `{header}`: {message}")]
    InvalidSheet { header: String, message: String },
    #[error("score sheet `{header}` has no row for task {task}")]
    MissingRow { header: String, task: String },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("live evaluation: {0}")]
    Live(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
