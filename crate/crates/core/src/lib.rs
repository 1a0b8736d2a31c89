//! An autonomous R&D loop engine.
//!
//! A user intention is analyzed into a [`agent::RequirementSpec`], experiments
//! are proposed by scoring candidate plans against the [`knowledge`] base,
//! grounded slot by slot against a [`symlang::FrameworkSchema`], executed in
//! an environment such as [`simenv::SimEnv`], and folded back into the
//! knowledge base. [`eval`] reproduces published benchmark aggregates and
//! scores live runs.

pub mod agent;
pub mod eval;
pub mod knowledge;
pub mod llm;
pub mod simenv;
pub mod symlang;

/// Documents bundled with the crate.
pub mod assets {
    pub const DEMO_SCHEMA: &str = include_str!("../assets/demo_schema.toml");
    pub const DEMO_SURFACE: &str = include_str!("../assets/demo_surface.toml");
    pub const PROMPTS: &str = include_str!("../assets/prompts.toml");
}
