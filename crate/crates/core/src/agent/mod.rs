//! The R&D cycle: requirement analysis, utility-scored experiment
//! proposal, per-slot grounding through an LLM, execution in an
//! [`Environment`], and recording of every outcome in the knowledge base.

mod cycle;
mod describe;
mod ground;
mod project;
mod propose;
mod report;
mod requirements;
mod transcript;
mod utility;

use thiserror::Error;

pub use cycle::{execute, Agent, ClockMode, CycleConfig};
pub use ground::{ground, GroundingOptions, GroundingOutcome, SlotGrounding};
pub use project::{EnvError, Environment, RunnableProject};
pub use propose::{
    CandidateSource, IdeaCitation, ProposalOptions, ProposalPolicy, ProposedExperiment, ProposedExperimentSet, Proposer,
};
pub use report::{BestResult, CycleReport, ExperimentOutcome, IterationReport, SecondaryCheck, REPORT_VERSION};
pub use requirements::{
    analyze_requirements, AnalysisOptions, Intention, Provenance, RequirementSpec, SecondaryTarget, TracedConstraint,
    DOMAIN_CATEGORY,
};
pub use transcript::{Transcript, TranscriptEntry};
pub use utility::{score_utility, UtilityConfig, UtilityModel, UtilityScore, UtilityWeights};

use crate::knowledge::KnowledgeError;
use crate::llm::LlmError;
use crate::symlang::{PlanError, SchemaError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("intention text is empty")]
    EmptyIntention,
    #[error("unknown target metric `{0}`")]
    UnknownTargetMetric(String),
    #[error("requirement analysis failed: {reason}")]
    AnalysisFailed { reason: String, transcript: Transcript },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("project is not runnable")]
    NotRunnable,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
