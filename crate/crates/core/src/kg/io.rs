use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, KgEdge, KgNode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct GraphDocRef<'a> {
    format_version: u32,
    nodes: Vec<&'a KgNode>,
    edges: Vec<&'a KgEdge>,
}

#[derive(Deserialize)]
struct GraphDoc {
    format_version: u32,
    nodes: Vec<KgNode>,
    edges: Vec<KgEdge>,
}

impl Graph {
    /// Pretty-printed JSON document; nodes sorted by id, edges by
    /// `(src, dst, relation)`.
    pub fn to_json(&self) -> String {
        let doc = GraphDocRef {
            format_version: FORMAT_VERSION,
            nodes: self.nodes.values().collect(),
            edges: self.edges.values().collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_json().into_bytes()
    }

    pub fn from_json(text: &str) -> Result<Graph, GraphError> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            offset: byte_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        if doc.format_version != FORMAT_VERSION {
            return Err(GraphError::UnsupportedVersion(doc.format_version));
        }
        let mut g = Graph::new();
        for n in doc.nodes {
            g.add_node(n)?;
        }
        for e in doc.edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Graph, GraphError> {
        let text = std::str::from_utf8(bytes).map_err(|e| GraphError::Parse {
            offset: e.valid_up_to(),
            message: "graph file is not valid UTF-8".into(),
        })?;
        Self::from_json(text)
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_round_trip() {
        let g = Graph::new();
        assert_eq!(Graph::from_bytes(&g.to_bytes()).unwrap(), g);
    }

    #[test]
    fn round_trip_with_attrs() {
        let mut g = Graph::new();
        g.add_node(
            KgNode::new("a", "clk", "port")
                .with_module("top")
                .with_attr("width", "1")
                .with_source("top.v:3"),
        )
        .unwrap();
        g.add_node(KgNode::new("b", "Clock", "Clock").with_description("main clock"))
            .unwrap();
        g.add_edge(KgEdge::new("a", "b", "links_to_spec").with_weight(0.9))
            .unwrap();
        let back = Graph::from_bytes(&g.to_bytes()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.adjacency(), g.adjacency());
        assert_eq!(back.to_bytes(), g.to_bytes());
    }

    #[test]
    fn truncated_payload_is_error() {
        let mut g = Graph::new();
        g.add_node(KgNode::new("a", "a", "x")).unwrap();
        let bytes = g.to_bytes();
        let err = Graph::from_bytes(&bytes[..bytes.len() / 2]).unwrap_err();
        match err {
            GraphError::Parse { offset, .. } => assert!(offset <= bytes.len() / 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_rejected() {
        let text = r#"{"format_version":1,"nodes":[],"edges":[{"src":"a","dst":"b","relation":"r"}]}"#;
        assert!(matches!(
            Graph::from_json(text),
            Err(GraphError::MissingEndpoint(_))
        ));
    }

    #[test]
    fn byte_offset_maps_lines() {
        let text = "ab\ncd\nef";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 2), 4);
        assert_eq!(byte_offset(text, 3, 1), 6);
    }
}
