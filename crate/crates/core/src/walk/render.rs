use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WalkPath;
use crate::kg::{Graph, KgNode, NodeId};

/// Edge lines shown per path before the truncation marker.
pub const DISPLAY_CAP: usize = 60;

pub const TRUNCATION_MARKER: &str = "... [truncated]";

/// Relation → display phrase; unlisted relations render verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerbTable(BTreeMap<String, String>);

impl Default for VerbTable {
    fn default() -> Self {
        Self::from_toml(include_str!("../../assets/relation_verbs.toml")).expect("shipped verb table parses")
    }
}

impl VerbTable {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text).map(VerbTable)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn verb<'a>(&'a self, relation: &'a str) -> &'a str {
        self.0.get(relation).map(String::as_str).unwrap_or(relation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathText {
    pub header: String,
    pub lines: Vec<String>,
    pub truncated: bool,
}

impl fmt::Display for PathText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.header)?;
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        if self.truncated {
            writeln!(f, "{TRUNCATION_MARKER}")?;
        }
        Ok(())
    }
}

fn label(n: Option<&KgNode>, id: &NodeId) -> String {
    match n {
        Some(n) => match &n.module {
            Some(m) => format!("{} ({} in {m})", n.name, n.node_type.as_str()),
            None => format!("{} ({})", n.name, n.node_type.as_str()),
        },
        None => id.to_string(),
    }
}

fn name(g: &Graph, id: &NodeId) -> String {
    g.node(id).map_or_else(|| id.to_string(), |n| n.name.clone())
}

/// Renders a walk as a header plus one line per traversed edge, in the
/// edge's stored direction.
pub fn path_to_text(g: &Graph, p: &WalkPath, verbs: &VerbTable, cap: usize) -> PathText {
    let start = &p.nodes[0];
    let discovered = if p.discovered_signals.is_empty() {
        "none".to_string()
    } else {
        p.discovered_signals.iter().map(|s| name(g, s)).collect::<Vec<_>>().join(", ")
    };
    let header = format!(
        "Path from {}. Path length: {} nodes, discovered signals: {discovered}",
        label(g.node(start), start),
        p.nodes.len()
    );
    let lines: Vec<String> = p
        .edges
        .iter()
        .take(cap)
        .map(|k| {
            format!(
                "{} {} {}",
                label(g.node(&k.src), &k.src),
                verbs.verb(k.relation.as_str()),
                label(g.node(&k.dst), &k.dst)
            )
        })
        .collect();
    PathText {
        header,
        truncated: p.edges.len() > cap,
        lines,
    }
}
