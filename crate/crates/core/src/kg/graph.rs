use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::{merge_description, merge_sources, EdgeKey, KgEdge, KgNode, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node `{id}` already exists with type `{existing}`, refusing to merge type `{incoming}`")]
    TypeConflict {
        id: NodeId,
        existing: String,
        incoming: String,
    },
    #[error("edge endpoint `{0}` does not exist")]
    MissingEndpoint(NodeId),
    #[error("edge weight must be non-negative and finite, got {0}")]
    InvalidWeight(f64),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported graph format version {0}")]
    UnsupportedVersion(u32),
}

/// Directed multigraph with deduplicated `(src, dst, relation)` edges.
///
/// `adjacency` is the undirected neighbour index; it is derived from the
/// edge map and rebuilt on deserialize.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    pub(crate) nodes: BTreeMap<NodeId, KgNode>,
    pub(crate) edges: BTreeMap<EdgeKey, KgEdge>,
    pub(crate) adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &NodeId) -> Option<&KgNode> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut KgNode> {
        self.nodes.get_mut(id)
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &KgNode> {
        self.nodes.values()
    }

    /// Edges in `(src, dst, relation)` order.
    pub fn edges(&self) -> impl Iterator<Item = &KgEdge> {
        self.edges.values()
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<&KgEdge> {
        self.edges.get(key)
    }

    /// Inserts a node, or merges it into an existing node with the same id
    /// and type (descriptions joined, provenance unioned, missing attrs
    /// filled in).
    /// Mutable access for description/attribute updates. Callers must not
    /// change the edge's endpoints or relation.
    pub(crate) fn edge_mut(&mut self, key: &EdgeKey) -> Option<&mut KgEdge> {
        self.edges.get_mut(key)
    }

    pub fn add_node(&mut self, node: KgNode) -> Result<&KgNode, GraphError> {
        let id = node.id.clone();
        match self.nodes.get_mut(&id) {
            Some(existing) => {
                if existing.node_type != node.node_type {
                    return Err(GraphError::TypeConflict {
                        id,
                        existing: existing.node_type.0.clone(),
                        incoming: node.node_type.0,
                    });
                }
                merge_description(&mut existing.description, &node.description);
                merge_sources(&mut existing.source_ids, &node.source_ids);
                if existing.module.is_none() {
                    existing.module = node.module;
                }
                for (k, v) in node.attrs {
                    existing.attrs.entry(k).or_insert(v);
                }
            }
            None => {
                self.adjacency.entry(id.clone()).or_default();
                self.nodes.insert(id.clone(), node);
            }
        }
        Ok(&self.nodes[&id])
    }

    /// Inserts an edge. An edge with the same `(src, dst, relation)` is
    /// merged: descriptions concatenated, provenance unioned, the larger
    /// weight kept.
    pub fn add_edge(&mut self, edge: KgEdge) -> Result<&KgEdge, GraphError> {
        for end in [&edge.src, &edge.dst] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::MissingEndpoint(end.clone()));
            }
        }
        if !(edge.weight >= 0.0 && edge.weight.is_finite()) {
            return Err(GraphError::InvalidWeight(edge.weight));
        }
        let key = edge.key();
        match self.edges.get_mut(&key) {
            Some(existing) => {
                merge_description(&mut existing.description, &edge.description);
                merge_sources(&mut existing.source_ids, &edge.source_ids);
                existing.weight = existing.weight.max(edge.weight);
            }
            None => {
                if edge.src != edge.dst {
                    self.adjacency
                        .entry(edge.src.clone())
                        .or_default()
                        .insert(edge.dst.clone());
                    self.adjacency
                        .entry(edge.dst.clone())
                        .or_default()
                        .insert(edge.src.clone());
                }
                self.edges.insert(key.clone(), edge);
            }
        }
        Ok(&self.edges[&key])
    }

    /// Distinct undirected neighbours (self-loops excluded), in id order.
    pub fn neighbors(&self, id: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    /// Undirected degree: number of incident edges, a self-loop counting
    /// twice.
    pub fn degree(&self, id: &NodeId) -> usize {
        self.degrees().get(id).copied().unwrap_or(0)
    }

    pub fn degrees(&self) -> BTreeMap<&NodeId, usize> {
        let mut deg: BTreeMap<&NodeId, usize> = self.nodes.keys().map(|k| (k, 0)).collect();
        for e in self.edges.values() {
            *deg.get_mut(&e.src).expect("edge endpoints exist") += 1;
            *deg.get_mut(&e.dst).expect("edge endpoints exist") += 1;
        }
        deg
    }

    /// All edges between `a` and `b` in either direction, forward first.
    /// The flag is `true` for edges stored as `b -> a`.
    pub fn edges_between<'a>(
        &'a self,
        a: &'a NodeId,
        b: &'a NodeId,
    ) -> impl Iterator<Item = (&'a KgEdge, bool)> + 'a {
        self.directed_edges(a, b)
            .map(|e| (e, false))
            .chain(self.directed_edges(b, a).map(|e| (e, true)))
    }

    fn directed_edges<'a>(&'a self, src: &'a NodeId, dst: &'a NodeId) -> impl Iterator<Item = &'a KgEdge> + 'a {
        let from = EdgeKey {
            src: src.clone(),
            dst: dst.clone(),
            relation: super::RelationType(String::new()),
        };
        self.edges
            .range(from..)
            .take_while(move |(k, _)| &k.src == src && &k.dst == dst)
            .map(|(_, e)| e)
    }

    /// Weakly connected components, each sorted, ordered by smallest id.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
        let mut out = Vec::new();
        for start in self.nodes.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start.clone()];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if seen.insert(v) {
                        comp.push(v.clone());
                        queue.push_back(v);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    /// Adds a single `root` node linked to the highest-degree node of every
    /// weakly connected component when there is more than one component.
    /// Returns the root id when one was added.
    pub fn ensure_connected(&mut self) -> Option<NodeId> {
        let comps = self.components();
        if comps.len() <= 1 {
            return None;
        }
        let deg = self.degrees();
        let hubs: Vec<NodeId> = comps
            .iter()
            .map(|comp| {
                // max degree, ties to the smallest id (components are sorted)
                let mut best = &comp[0];
                for id in comp {
                    if deg[id] > deg[best] {
                        best = id;
                    }
                }
                best.clone()
            })
            .collect();

        let mut root_id = NodeId::new("root");
        let mut n = 1;
        while self.nodes.contains_key(&root_id) {
            root_id = NodeId::new(format!("root_{n}"));
            n += 1;
        }
        self.add_node(
            KgNode::new(root_id.clone(), "root", "root")
                .with_description("synthetic node joining disconnected components"),
        )
        .expect("fresh id");
        for hub in hubs {
            self.add_edge(KgEdge::new(root_id.clone(), hub, "root_connects"))
                .expect("endpoints exist");
        }
        Some(root_id)
    }

    /// Rebuilds the adjacency index from the edge map.
    pub fn rebuild_adjacency(&mut self) {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
            self.nodes.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        for e in self.edges.values() {
            if e.src != e.dst {
                adj.get_mut(&e.src).expect("endpoint").insert(e.dst.clone());
                adj.get_mut(&e.dst).expect("endpoint").insert(e.src.clone());
            }
        }
        self.adjacency = adj;
    }

    pub fn adjacency(&self) -> &BTreeMap<NodeId, BTreeSet<NodeId>> {
        &self.adjacency
    }

    /// Nodes whose name equals `name` exactly, in id order.
    pub fn nodes_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a KgNode> + 'a {
        self.nodes.values().filter(move |n| n.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, ty: &str) -> KgNode {
        KgNode::new(id, id, ty)
    }

    #[test]
    fn add_node_to_empty_graph() {
        let mut g = Graph::new();
        g.add_node(node("A", "Signal")).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn add_node_merges_descriptions() {
        let mut g = Graph::new();
        g.add_node(node("A", "Signal").with_description("first")).unwrap();
        g.add_node(node("A", "Signal").with_description("second")).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.node(&"A".into()).unwrap().description, "first; second");
    }

    #[test]
    fn add_node_type_conflict() {
        let mut g = Graph::new();
        g.add_node(node("A", "signal")).unwrap();
        let err = g.add_node(node("A", "module")).unwrap_err();
        assert!(matches!(err, GraphError::TypeConflict { .. }));
    }

    #[test]
    fn add_edge_dedups_on_key() {
        let mut g = Graph::new();
        g.add_node(node("A", "x")).unwrap();
        g.add_node(node("B", "x")).unwrap();
        g.add_edge(KgEdge::new("A", "B", "contains").with_description("one"))
            .unwrap();
        assert_eq!(g.edge_count(), 1);
        g.add_edge(KgEdge::new("A", "B", "contains").with_description("two"))
            .unwrap();
        assert_eq!(g.edge_count(), 1);
        let e = g.edges().next().unwrap();
        assert_eq!(e.description, "one; two");
        // a different relation is a parallel edge
        g.add_edge(KgEdge::new("A", "B", "drives")).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(&"A".into()).count(), 1);
    }

    #[test]
    fn add_edge_missing_endpoint() {
        let mut g = Graph::new();
        g.add_node(node("A", "x")).unwrap();
        let err = g.add_edge(KgEdge::new("A", "C", "drives")).unwrap_err();
        assert_eq!(err, GraphError::MissingEndpoint("C".into()));
    }

    #[test]
    fn negative_weight_rejected() {
        let mut g = Graph::new();
        g.add_node(node("A", "x")).unwrap();
        g.add_node(node("B", "x")).unwrap();
        let err = g
            .add_edge(KgEdge::new("A", "B", "drives").with_weight(-1.0))
            .unwrap_err();
        assert!(matches!(err, GraphError::InvalidWeight(_)));
    }

    #[test]
    fn ensure_connected_cases() {
        let mut empty = Graph::new();
        assert!(empty.ensure_connected().is_none());
        assert!(empty.is_empty());

        let mut g = Graph::new();
        for id in ["A", "B", "C"] {
            g.add_node(node(id, "x")).unwrap();
        }
        g.add_edge(KgEdge::new("A", "B", "r")).unwrap();
        g.add_edge(KgEdge::new("B", "C", "r")).unwrap();
        let before = g.clone();
        assert!(g.ensure_connected().is_none());
        assert_eq!(g, before);

        let mut two = Graph::new();
        for id in ["A", "B", "X", "Y", "Z"] {
            two.add_node(node(id, "x")).unwrap();
        }
        two.add_edge(KgEdge::new("A", "B", "r")).unwrap();
        two.add_edge(KgEdge::new("X", "Y", "r")).unwrap();
        two.add_edge(KgEdge::new("Y", "Z", "r")).unwrap();
        let root = two.ensure_connected().unwrap();
        assert_eq!(two.node_count(), 6);
        assert_eq!(two.edge_count(), 5);
        let hubs: Vec<_> = two.neighbors(&root).cloned().collect();
        // A (tie with B, smallest id) and Y (degree 2)
        assert_eq!(hubs, vec![NodeId::from("A"), NodeId::from("Y")]);
        let again = two.clone();
        assert!(two.ensure_connected().is_none());
        assert_eq!(two, again);
    }

    #[test]
    fn edges_between_both_directions() {
        let mut g = Graph::new();
        g.add_node(node("A", "x")).unwrap();
        g.add_node(node("B", "x")).unwrap();
        g.add_edge(KgEdge::new("B", "A", "drives")).unwrap();
        g.add_edge(KgEdge::new("A", "B", "contains")).unwrap();
        let a = NodeId::from("A");
        let b = NodeId::from("B");
        let found: Vec<_> = g
            .edges_between(&a, &b)
            .map(|(e, rev)| (e.relation.0.clone(), rev))
            .collect();
        assert_eq!(
            found,
            vec![("contains".to_string(), false), ("drives".to_string(), true)]
        );
    }
}
