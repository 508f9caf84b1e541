use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{NodeType, RelationType, RTL_NODE_KINDS, RTL_RELATION_KINDS};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema must declare at least one entity type")]
    NoEntityTypes,
    #[error("schema must declare at least one relation type")]
    NoRelationTypes,
    #[error("duplicate {kind} type `{name}` in schema")]
    Duplicate { kind: &'static str, name: String },
    #[error("cannot read schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema file: {0}")]
    Format(#[from] toml::de::Error),
}

/// Entity and relation vocabularies used for spec extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    entity_types: BTreeSet<String>,
    relation_types: BTreeSet<String>,
    /// Declaration order, used when rendering prompts.
    entity_order: Vec<String>,
    relation_order: Vec<String>,
}

#[derive(Deserialize)]
struct SchemaFile {
    entity_types: Vec<String>,
    relation_types: Vec<String>,
}

const HARDWARE_SCHEMA: &str = include_str!("../../assets/schema.toml");

impl Schema {
    pub fn new(entity_types: Vec<String>, relation_types: Vec<String>) -> Result<Self, SchemaError> {
        if entity_types.is_empty() {
            return Err(SchemaError::NoEntityTypes);
        }
        if relation_types.is_empty() {
            return Err(SchemaError::NoRelationTypes);
        }
        let mut es = BTreeSet::new();
        for e in &entity_types {
            if !es.insert(e.clone()) {
                return Err(SchemaError::Duplicate {
                    kind: "entity",
                    name: e.clone(),
                });
            }
        }
        let mut rs = BTreeSet::new();
        for r in &relation_types {
            if !rs.insert(r.clone()) {
                return Err(SchemaError::Duplicate {
                    kind: "relation",
                    name: r.clone(),
                });
            }
        }
        Ok(Schema {
            entity_types: es,
            relation_types: rs,
            entity_order: entity_types,
            relation_order: relation_types,
        })
    }

    /// The bundled hardware-design schema.
    pub fn hardware() -> Self {
        Self::from_toml(HARDWARE_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, SchemaError> {
        let f: SchemaFile = toml::from_str(text)?;
        Self::new(f.entity_types, f.relation_types)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_order
    }

    pub fn relation_types(&self) -> &[String] {
        &self.relation_order
    }

    /// Canonical spelling of an entity type, matched case-insensitively.
    pub fn canonical_entity(&self, name: &str) -> Option<&str> {
        canonical(&self.entity_order, name)
    }

    pub fn canonical_relation(&self, name: &str) -> Option<&str> {
        canonical(&self.relation_order, name)
    }

    pub fn allows_node_type(&self, t: &NodeType) -> bool {
        self.entity_types.contains(&t.0) || t.is_rtl_kind()
    }

    pub fn allows_relation(&self, r: &RelationType) -> bool {
        self.relation_types.contains(&r.0) || r.is_rtl_kind()
    }

    /// Every node type accepted in a refined graph.
    pub fn all_node_types(&self) -> BTreeSet<String> {
        let mut all = self.entity_types.clone();
        all.extend(RTL_NODE_KINDS.iter().map(|s| s.to_string()));
        all
    }

    pub fn all_relation_types(&self) -> BTreeSet<String> {
        let mut all = self.relation_types.clone();
        all.extend(RTL_RELATION_KINDS.iter().map(|s| s.to_string()));
        all
    }
}

fn canonical<'a>(list: &'a [String], name: &str) -> Option<&'a str> {
    let name = name.trim();
    list.iter()
        .find(|e| e.as_str() == name)
        .or_else(|| list.iter().find(|e| e.eq_ignore_ascii_case(name)))
        .map(String::as_str)
}
