use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Graph, NodeId};

/// First step of a shortest path from any node toward each target, over the
/// undirected unit-weight view of the graph. Equal-length alternatives are
/// resolved to the lexicographically smallest next-hop id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NextHopTable {
    hops: BTreeMap<(NodeId, NodeId), NodeId>,
}

impl NextHopTable {
    pub fn get(&self, from: &NodeId, target: &NodeId) -> Option<&NodeId> {
        self.hops.get(&(from.clone(), target.clone()))
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &NodeId)> {
        self.hops.iter()
    }
}

impl Graph {
    /// Hop distances from `source` to every reachable node.
    pub fn bfs_distances(&self, source: &NodeId) -> BTreeMap<NodeId, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains_node(source) {
            return dist;
        }
        dist.insert(source.clone(), 0);
        let mut queue = VecDeque::from([source.clone()]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for v in self.neighbors(&u) {
                if !dist.contains_key(v) {
                    dist.insert(v.clone(), du + 1);
                    queue.push_back(v.clone());
                }
            }
        }
        dist
    }

    /// Builds the next-hop table toward every target in `targets`. Targets
    /// absent from the graph are ignored.
    pub fn next_hop_table(&self, targets: &BTreeSet<NodeId>) -> NextHopTable {
        let mut hops = BTreeMap::new();
        for t in targets {
            let dist = self.bfs_distances(t);
            for (u, &du) in &dist {
                if du == 0 {
                    continue;
                }
                // neighbours iterate in id order, so the first hit is the
                // lexicographically smallest next hop
                let next = self
                    .neighbors(u)
                    .find(|v| dist.get(*v) == Some(&(du - 1)))
                    .expect("a reachable node has a neighbour one hop closer");
                hops.insert((u.clone(), t.clone()), next.clone());
            }
        }
        NextHopTable { hops }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KgEdge, KgNode};

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> Graph {
        let mut g = Graph::new();
        for n in nodes {
            g.add_node(KgNode::new(*n, *n, "x")).unwrap();
        }
        for (a, b) in edges {
            g.add_edge(KgEdge::new(*a, *b, "r")).unwrap();
        }
        g
    }

    fn set(ids: &[&str]) -> BTreeSet<NodeId> {
        ids.iter().map(|s| NodeId::from(*s)).collect()
    }

    #[test]
    fn path_graph() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let t = g.next_hop_table(&set(&["C"]));
        assert_eq!(t.get(&"A".into(), &"C".into()), Some(&"B".into()));
        assert_eq!(t.get(&"B".into(), &"C".into()), Some(&"C".into()));
        assert_eq!(t.get(&"C".into(), &"C".into()), None);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn star_graph() {
        let g = graph(&["X", "L1", "L2"], &[("X", "L1"), ("X", "L2")]);
        let t = g.next_hop_table(&set(&["L2"]));
        assert_eq!(t.get(&"L1".into(), &"L2".into()), Some(&"X".into()));
    }

    #[test]
    fn diamond_tie_break() {
        // two shortest paths A-B-D and A-C-D; enumerating both gives next
        // hops {B, C}, the tie-break picks B
        let g = graph(
            &["A", "B", "C", "D"],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")],
        );
        let t = g.next_hop_table(&set(&["D"]));
        assert_eq!(t.get(&"A".into(), &"D".into()), Some(&"B".into()));
    }

    #[test]
    fn unreachable_pairs_absent() {
        let g = graph(&["A", "B", "C"], &[("A", "B")]);
        let t = g.next_hop_table(&set(&["C"]));
        assert!(t.is_empty());
    }

    #[test]
    fn direction_is_ignored() {
        // edges point away from the target; undirected view still routes
        let g = graph(&["A", "B", "C"], &[("C", "B"), ("B", "A")]);
        let t = g.next_hop_table(&set(&["C"]));
        assert_eq!(t.get(&"A".into(), &"C".into()), Some(&"B".into()));
    }
}
