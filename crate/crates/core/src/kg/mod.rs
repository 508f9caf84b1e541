//! Typed, attributed directed multigraph shared by spec-derived and
//! RTL-derived knowledge.
//!
//! Nodes are keyed by an opaque [`NodeId`]; edges are keyed by
//! `(src, dst, relation)` so that repeated extractions of the same fact
//! collapse into one edge with merged provenance.

mod graph;
mod io;
mod paths;
mod schema;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use graph::{Graph, GraphError};
pub use io::FORMAT_VERSION;
pub use paths::NextHopTable;
pub use schema::{Schema, SchemaError};

/// Separator used when merging free-text descriptions.
pub const DESCRIPTION_SEPARATOR: &str = "; ";

/// Opaque unique node identifier. Ordering is lexicographic on the string
/// form, which is what every deterministic tie-break in the crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// Node kinds produced by RTL analysis. These are always accepted in
/// addition to the active schema's entity types.
pub const RTL_NODE_KINDS: &[&str] = &[
    "module",
    "port",
    "signal",
    "register",
    "instance",
    "fsm",
    "control_flow",
    "assignment",
    "verification_point",
    "protocol_pattern",
    "root",
];

/// Relation kinds produced by RTL analysis and linking.
pub const RTL_RELATION_KINDS: &[&str] = &[
    "contains",
    "instantiates",
    "connects_port",
    "drives",
    "controls",
    "has_fsm",
    "assigns_to",
    "uses_in_rhs",
    "links_to_spec",
    "root_connects",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeType(pub String);

impl NodeType {
    pub fn new(name: impl Into<String>) -> Self {
        NodeType(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_rtl_kind(&self) -> bool {
        RTL_NODE_KINDS.contains(&self.0.as_str())
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationType(pub String);

impl RelationType {
    pub fn new(name: impl Into<String>) -> Self {
        RelationType(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_rtl_kind(&self) -> bool {
        RTL_RELATION_KINDS.contains(&self.0.as_str())
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Attribute key recording whether a node came from the spec or the RTL.
pub const ATTR_ORIGIN: &str = "origin";
pub const ORIGIN_SPEC: &str = "spec";
pub const ORIGIN_RTL: &str = "rtl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgNode {
    pub id: NodeId,
    pub name: String,
    pub node_type: NodeType,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source_ids: Vec<String>,
    /// Owning RTL module, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

impl KgNode {
    pub fn new(id: impl Into<NodeId>, name: impl Into<String>, node_type: impl Into<String>) -> Self {
        KgNode {
            id: id.into(),
            name: name.into(),
            node_type: NodeType::new(node_type),
            description: String::new(),
            source_ids: Vec::new(),
            module: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_ids.push(source_id.into());
        self
    }

    pub fn with_module(mut self, module: impl Into<String>) -> Self {
        self.module = Some(module.into());
        self
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.insert(key.into(), value.into());
        self
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }

    pub fn is_rtl(&self) -> bool {
        self.attr(ATTR_ORIGIN) == Some(ORIGIN_RTL)
    }

    pub fn is_spec(&self) -> bool {
        self.attr(ATTR_ORIGIN) == Some(ORIGIN_SPEC)
    }
}

/// Deduplication key of an edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: RelationType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: RelationType,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source_ids: Vec<String>,
}

fn default_weight() -> f64 {
    1.0
}

impl KgEdge {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, relation: impl Into<String>) -> Self {
        KgEdge {
            src: src.into(),
            dst: dst.into(),
            relation: RelationType::new(relation),
            weight: 1.0,
            description: String::new(),
            source_ids: Vec::new(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_ids.push(source_id.into());
        self
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            src: self.src.clone(),
            dst: self.dst.clone(),
            relation: self.relation.clone(),
        }
    }
}

/// Appends `piece` to a separator-joined description unless it is empty or
/// already one of the joined parts.
pub(crate) fn merge_description(existing: &mut String, piece: &str) {
    let piece = piece.trim();
    if piece.is_empty() {
        return;
    }
    if existing.is_empty() {
        existing.push_str(piece);
        return;
    }
    if existing.split(DESCRIPTION_SEPARATOR).any(|p| p == piece) {
        return;
    }
    existing.push_str(DESCRIPTION_SEPARATOR);
    existing.push_str(piece);
}

pub(crate) fn merge_sources(existing: &mut Vec<String>, incoming: &[String]) {
    for s in incoming {
        if !existing.contains(s) {
            existing.push(s.clone());
        }
    }
}
