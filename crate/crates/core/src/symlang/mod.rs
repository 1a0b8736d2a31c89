//! Framework schemas as a typed symbolic language.
//!
//! A [`FrameworkSchema`] lists the framework's slots (data, model,
//! evaluation, ...), the templates each slot offers and the typed parameters
//! of each template. An [`ExperimentPlan`] picks one configuration per slot;
//! plans are validated, decomposed into per-slot [`SubTask`]s and diffed
//! against one another entirely in terms of this language.

mod diff;
mod grid;
mod plan;
mod predicate;
mod schema;
mod validate;
mod value;

use thiserror::Error;

pub use diff::{diff_plans, PlanDelta, SlotChange};
pub use grid::{enumerate_plans, slot_choices};
pub use plan::{decompose, ExperimentPlan, SlotPlan, SlotRole, SubTask, PLAN_DOCUMENT_VERSION};
pub use predicate::{satisfies_all, ComponentPredicate};
pub use schema::{
    define_schema, ExtensionInterface, FrameworkSchema, ModuleSlot, ParameterSpec, SchemaDescriptor,
    SlotDescriptor, SlotKind, Template, TemplateDescriptor, SCHEMA_DOCUMENT_VERSION,
};
pub use validate::{rule, validate_plan, ValidationReport, Violation};
pub use value::{ParamValue, ValueDomain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("schema document does not parse: {0}")]
    Parse(String),
    #[error("cannot read schema: {0}")]
    Io(String),
    #[error("unsupported schema_version {0}")]
    UnsupportedVersion(u32),
    #[error("duplicate slot name `{name}` at {location}")]
    DuplicateSlot { name: String, location: String },
    #[error("missing kind coverage: no slot of kind {}", .0.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", "))]
    MissingKindCoverage(Vec<SlotKind>),
    #[error("dangling template reference: `{template}` names unknown slot `{slot}` at {location}")]
    DanglingTemplate {
        template: String,
        slot: String,
        location: String,
    },
    #[error("duplicate template `{template}` in slot `{slot}` at {location}")]
    DuplicateTemplate {
        slot: String,
        template: String,
        location: String,
    },
    #[error("duplicate parameter `{parameter}` in template `{template}` at {location}")]
    DuplicateParameter {
        template: String,
        parameter: String,
        location: String,
    },
    #[error("default for {template}.{parameter} at {location} is out of domain: {reason}")]
    DefaultOutOfDomain {
        template: String,
        parameter: String,
        reason: String,
        location: String,
    },
    #[error("slot `{0}` offers no templates")]
    EmptySlot(String),
    #[error("unknown reference: {0}")]
    UnknownReference(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan document does not parse: {0}")]
    Parse(String),
    #[error("cannot read plan: {0}")]
    Io(String),
    #[error("unsupported plan schema_version {0}")]
    UnsupportedVersion(u32),
    #[error("plans belong to different schemas (`{left}` vs `{right}`)")]
    SchemaMismatch { left: String, right: String },
    #[error("plan is invalid: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}
