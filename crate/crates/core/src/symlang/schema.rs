use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::value::{ParamValue, ValueDomain};
use super::SchemaError;

pub const SCHEMA_DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Data,
    Model,
    Evaluation,
}

impl SlotKind {
    pub const ALL: [SlotKind; 3] = [SlotKind::Data, SlotKind::Model, SlotKind::Evaluation];

    pub fn as_str(self) -> &'static str {
        match self {
            SlotKind::Data => "data",
            SlotKind::Model => "model",
            SlotKind::Evaluation => "evaluation",
        }
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(default)]
    pub domain: ValueDomain,
    /// Whether the template-grid enumerator should vary this parameter.
    #[serde(default)]
    pub searchable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    #[serde(default)]
    pub parameters: Vec<ParameterSpec>,
    #[serde(default)]
    pub defaults: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub doc: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl Template {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSpec> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t.eq_ignore_ascii_case(tag))
    }
}

/// The contract an extension of a slot must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExtensionInterface {
    pub description: String,
    /// Identifiers every extension code unit must mention.
    #[serde(default)]
    pub required_symbols: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSlot {
    pub name: String,
    pub kind: SlotKind,
    pub templates: Vec<Template>,
    pub extension_interface: ExtensionInterface,
}

impl ModuleSlot {
    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }
}

/// A framework described as a typed symbolic language: ordered slots, each
/// offering templates with typed parameters and an extension point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameworkSchema {
    name: String,
    version: String,
    slots: Vec<ModuleSlot>,
}

impl FrameworkSchema {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn slots(&self) -> &[ModuleSlot] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&ModuleSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn template(&self, slot: &str, template: &str) -> Option<&Template> {
        self.slot(slot).and_then(|s| s.template(template))
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let descriptor: SchemaDescriptor =
            toml::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
        define_schema(descriptor)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The demo quantitative-research schema bundled with the crate.
    pub fn demo() -> Self {
        Self::from_toml_str(crate::assets::DEMO_SCHEMA).expect("bundled demo schema is valid")
    }

    /// Serializes back to the descriptor document format.
    pub fn to_descriptor(&self) -> SchemaDescriptor {
        SchemaDescriptor {
            schema_version: SCHEMA_DOCUMENT_VERSION,
            name: self.name.clone(),
            version: self.version.clone(),
            slots: self
                .slots
                .iter()
                .map(|s| SlotDescriptor {
                    name: s.name.clone(),
                    kind: s.kind,
                    extension_interface: s.extension_interface.clone(),
                })
                .collect(),
            templates: self
                .slots
                .iter()
                .flat_map(|s| {
                    s.templates.iter().map(|t| TemplateDescriptor {
                        slot: s.name.clone(),
                        template: t.clone(),
                    })
                })
                .collect(),
        }
    }
}

/// On-disk schema document. Slots and templates are declared separately;
/// each template names the slot it extends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub slots: Vec<SlotDescriptor>,
    #[serde(default)]
    pub templates: Vec<TemplateDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDescriptor {
    pub name: String,
    pub kind: SlotKind,
    #[serde(default)]
    pub extension_interface: ExtensionInterface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateDescriptor {
    pub slot: String,
    #[serde(flatten)]
    pub template: Template,
}

/// Builds a schema from a descriptor, checking every structural invariant.
pub fn define_schema(descriptor: SchemaDescriptor) -> Result<FrameworkSchema, SchemaError> {
    if descriptor.schema_version != SCHEMA_DOCUMENT_VERSION {
        return Err(SchemaError::UnsupportedVersion(descriptor.schema_version));
    }

    let mut seen = BTreeSet::new();
    for (i, slot) in descriptor.slots.iter().enumerate() {
        if !seen.insert(slot.name.as_str()) {
            return Err(SchemaError::DuplicateSlot {
                name: slot.name.clone(),
                location: format!("slots[{i}]"),
            });
        }
    }

    let missing: Vec<SlotKind> = SlotKind::ALL
        .into_iter()
        .filter(|k| !descriptor.slots.iter().any(|s| s.kind == *k))
        .collect();
    if !missing.is_empty() {
        return Err(SchemaError::MissingKindCoverage(missing));
    }

    let mut slots: Vec<ModuleSlot> = descriptor
        .slots
        .into_iter()
        .map(|s| ModuleSlot {
            name: s.name,
            kind: s.kind,
            templates: Vec::new(),
            extension_interface: s.extension_interface,
        })
        .collect();

    for (i, td) in descriptor.templates.into_iter().enumerate() {
        let location = format!("templates[{i}]");
        let Some(slot) = slots.iter_mut().find(|s| s.name == td.slot) else {
            return Err(SchemaError::DanglingTemplate {
                template: td.template.name,
                slot: td.slot,
                location,
            });
        };
        let t = td.template;
        if slot.template(&t.name).is_some() {
            return Err(SchemaError::DuplicateTemplate {
                slot: slot.name.clone(),
                template: t.name,
                location,
            });
        }
        let mut names = BTreeSet::new();
        for p in &t.parameters {
            if !names.insert(p.name.as_str()) {
                return Err(SchemaError::DuplicateParameter {
                    template: t.name.clone(),
                    parameter: p.name.clone(),
                    location: location.clone(),
                });
            }
        }
        for (name, value) in &t.defaults {
            let domain = t.parameter(name).map(|p| &p.domain).cloned().unwrap_or_default();
            if let Some(reason) = domain.check(value) {
                return Err(SchemaError::DefaultOutOfDomain {
                    template: t.name.clone(),
                    parameter: name.clone(),
                    reason,
                    location: location.clone(),
                });
            }
        }
        slot.templates.push(t);
    }

    if let Some(empty) = slots.iter().find(|s| s.templates.is_empty()) {
        return Err(SchemaError::EmptySlot(empty.name.clone()));
    }

    Ok(FrameworkSchema {
        name: descriptor.name,
        version: descriptor.version,
        slots,
    })
}
