//! A deterministic simulated experiment environment.
//!
//! A [`ResponseSurface`] assigns every metric an additive model over plan
//! features (templates and `Template.parameter=value` pairs) with pairwise
//! interactions and seeded Gaussian noise. [`SimEnv`] binds a surface to a
//! schema, evaluates grounded projects, and finds the noise-free optimum of
//! a constrained grid by exhaustive enumeration.

mod surface;

pub use surface::{Interaction, MetricModel, ResponseSurface, SimEnv, SimResult, SimTrace, TraceTerm, TracedMetric};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid surface: {0}")]
    Surface(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("surface has no entry for template `{0}`")]
    UnknownTemplate(String),
    #[error("surface has no metric `{0}`")]
    UnknownMetric(String),
    #[error("no plan satisfies the constraints")]
    EmptyGrid,
    #[error("project is not runnable")]
    NotRunnable,
}
