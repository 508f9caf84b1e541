//! Guided random walks with adaptive sampling from a target signal toward
//! the other architectural signals.
//!
//! Each step scores every neighbour `c` of the current node as
//! `alpha * I(c) + beta * D(c) + gamma * N(c)` and samples from the
//! normalized scores, where `I` is importance (degree and type weight),
//! `D` the fraction of remaining targets for which `c` is the next hop,
//! and `N` novelty within the current walk.

mod render;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use render::{path_to_text, PathText, VerbTable, DISPLAY_CAP};

use crate::kg::{EdgeKey, Graph, NextHopTable, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("start node {0} not in graph")]
    StartNotFound(NodeId),
    #[error("invalid walk configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub walks_per_signal: usize,
    pub step_budget: usize,
    pub seed: u64,
    /// End a walk at the first architectural signal reached instead of
    /// continuing while targets remain.
    pub stop_at_signal: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            alpha: 0.3,
            beta: 0.5,
            gamma: 0.2,
            walks_per_signal: 70,
            step_budget: 100,
            seed: 0,
            stop_at_signal: false,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        let w = [self.alpha, self.beta, self.gamma];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(WalkError::Config("alpha, beta and gamma must be finite and non-negative".into()));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(WalkError::Config("alpha, beta and gamma are all zero".into()));
        }
        if self.walks_per_signal == 0 || self.step_budget == 0 {
            return Err(WalkError::Config("walks_per_signal and step_budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// Node type → semantic weight `T(n)`; unknown types weigh `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TypeWeightTable {
    pub default: f64,
    pub weights: BTreeMap<String, f64>,
}

impl Default for TypeWeightTable {
    fn default() -> Self {
        TypeWeightTable {
            default: 1.0,
            weights: BTreeMap::new(),
        }
    }
}

impl TypeWeightTable {
    pub fn weight(&self, node_type: &str) -> f64 {
        self.weights.get(node_type).copied().unwrap_or(self.default)
    }
}

/// `0.4 * deg(n) / max_degree + 0.6 * T(n)`; the degree term is 0 when
/// `max_degree` is 0.
pub fn importance_value(degree: usize, max_degree: usize, type_weight: f64) -> f64 {
    let d = if max_degree == 0 { 0.0 } else { degree as f64 / max_degree as f64 };
    0.4 * d + 0.6 * type_weight
}

pub fn importance(g: &Graph, n: &NodeId, tw: &TypeWeightTable) -> f64 {
    let deg = g.degrees();
    let max = deg.values().copied().max().unwrap_or(0);
    let t = g.node(n).map_or(tw.default, |x| tw.weight(x.node_type.as_str()));
    importance_value(deg.get(n).copied().unwrap_or(0), max, t)
}

/// Fraction of `targets` for which `c` is the stored next hop from
/// `current`.
pub fn direction_score(next_hops: &NextHopTable, current: &NodeId, c: &NodeId, targets: &BTreeSet<NodeId>) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let hits = targets.iter().filter(|t| next_hops.get(current, t) == Some(c)).count();
    hits as f64 / targets.len() as f64
}

pub fn novelty(c: &NodeId, visited: &BTreeSet<NodeId>) -> f64 {
    if visited.contains(c) {
        0.0
    } else {
        1.0
    }
}

/// Normalizes raw scores; all-zero (or non-positive) totals fall back to
/// uniform.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if raw.is_empty() {
        return Vec::new();
    }
    if total <= 0.0 {
        return vec![1.0 / raw.len() as f64; raw.len()];
    }
    raw.iter().map(|r| r / total).collect()
}

/// Transition distribution over the neighbours of `current` (in id
/// order). Empty when `current` is a dead end.
pub fn transition_probs(
    g: &Graph,
    current: &NodeId,
    visited: &BTreeSet<NodeId>,
    next_hops: &NextHopTable,
    targets: &BTreeSet<NodeId>,
    cfg: &WalkConfig,
    tw: &TypeWeightTable,
) -> Vec<(NodeId, f64)> {
    let deg = g.degrees();
    let max = deg.values().copied().max().unwrap_or(0);
    let cands: Vec<&NodeId> = g.neighbors(current).filter(|c| *c != current).collect();
    let raw: Vec<f64> = cands
        .iter()
        .map(|c| {
            let t = g.node(c).map_or(tw.default, |x| tw.weight(x.node_type.as_str()));
            cfg.alpha * importance_value(deg[c], max, t)
                + cfg.beta * direction_score(next_hops, current, c, targets)
                + cfg.gamma * novelty(c, visited)
        })
        .collect();
    cands.into_iter().cloned().zip(normalize_scores(&raw)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    SignalReached,
    Budget,
    DeadEnd,
    AllSignalsFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeKey>,
    pub discovered_signals: Vec<NodeId>,
    pub terminated_by: Termination,
}

/// Dense, index-based view of the graph shared by all walks.
pub struct WalkEngine<'g> {
    ids: Vec<&'g NodeId>,
    index: HashMap<&'g NodeId, usize>,
    neighbors: Vec<Vec<usize>>,
    /// parallel to `neighbors`: the edge a step along that pair records
    via: Vec<Vec<EdgeKey>>,
    importance: Vec<f64>,
    /// per node: target → next hop
    hops: Vec<HashMap<usize, usize>>,
    targets: BTreeSet<usize>,
    cfg: WalkConfig,
}

impl<'g> WalkEngine<'g> {
    pub fn new(
        g: &'g Graph,
        arch_signals: &BTreeSet<NodeId>,
        cfg: &WalkConfig,
        tw: &TypeWeightTable,
    ) -> Result<Self, WalkError> {
        cfg.validate()?;
        let ids: Vec<&NodeId> = g.nodes().map(|n| &n.id).collect();
        let index: HashMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let deg = g.degrees();
        let max = deg.values().copied().max().unwrap_or(0);
        let importance = g
            .nodes()
            .map(|n| importance_value(deg[&n.id], max, tw.weight(n.node_type.as_str())))
            .collect();
        let neighbors: Vec<Vec<usize>> = ids
            .iter()
            .map(|id| g.neighbors(id).filter(|v| v != id).map(|v| index[v]).collect())
            .collect();
        let via = ids
            .iter()
            .zip(&neighbors)
            .map(|(a, ns)| ns.iter().map(|&b| traversed_edge(g, a, ids[b])).collect())
            .collect();
        let targets_present: BTreeSet<NodeId> = arch_signals.iter().filter(|t| g.contains_node(t)).cloned().collect();
        let table = g.next_hop_table(&targets_present);
        let mut hops = vec![HashMap::new(); ids.len()];
        for ((from, target), hop) in table.iter() {
            hops[index[from]].insert(index[target], index[hop]);
        }
        Ok(WalkEngine {
            targets: targets_present.iter().map(|t| index[t]).collect(),
            ids,
            index,
            neighbors,
            via,
            importance,
            hops,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &WalkConfig {
        &self.cfg
    }

    /// Step distribution as (neighbour index, probability).
    fn step_probs(&self, current: usize, visited: &[bool], remaining: &BTreeSet<usize>) -> Vec<(usize, f64)> {
        let cands = &self.neighbors[current];
        let mut hop_hits = vec![0usize; cands.len()];
        for t in remaining {
            if let Some(&h) = self.hops[current].get(t) {
                if let Some(k) = cands.iter().position(|&c| c == h) {
                    hop_hits[k] += 1;
                }
            }
        }
        let n_rem = remaining.len();
        let raw: Vec<f64> = cands
            .iter()
            .zip(&hop_hits)
            .map(|(&c, &hits)| {
                let d = if n_rem == 0 { 0.0 } else { hits as f64 / n_rem as f64 };
                let nov = if visited[c] { 0.0 } else { 1.0 };
                self.cfg.alpha * self.importance[c] + self.cfg.beta * d + self.cfg.gamma * nov
            })
            .collect();
        cands.iter().copied().zip(normalize_scores(&raw)).collect()
    }

    /// One walk from `start` using `rng`.
    pub fn walk(&self, start: &NodeId, rng: &mut impl Rng) -> Result<WalkPath, WalkError> {
        let &s = self.index.get(start).ok_or_else(|| WalkError::StartNotFound(start.clone()))?;
        let mut visited = vec![false; self.ids.len()];
        visited[s] = true;
        let mut remaining = self.targets.clone();
        remaining.remove(&s);
        let mut nodes = vec![s];
        let mut edges = Vec::new();
        let mut discovered = Vec::new();
        let mut current = s;
        let terminated_by = loop {
            if remaining.is_empty() {
                break Termination::AllSignalsFound;
            }
            if nodes.len() > self.cfg.step_budget {
                break Termination::Budget;
            }
            let probs = self.step_probs(current, &visited, &remaining);
            if probs.is_empty() {
                break Termination::DeadEnd;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (k, &(_, p)) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let next = probs[pick].0;
            nodes.push(next);
            edges.push(self.via[current][pick].clone());
            visited[next] = true;
            current = next;
            if remaining.remove(&next) {
                discovered.push(next);
                if self.cfg.stop_at_signal {
                    break Termination::SignalReached;
                }
            }
        };
        Ok(WalkPath {
            nodes: nodes.iter().map(|&i| self.ids[i].clone()).collect(),
            edges,
            discovered_signals: discovered.into_iter().map(|i| self.ids[i].clone()).collect(),
            terminated_by,
        })
    }

    /// `walks_per_signal` walks from `start`, each with its own RNG stream.
    pub fn run_walks(&self, start: &NodeId, signal: &str) -> Result<Vec<WalkPath>, WalkError> {
        (0..self.cfg.walks_per_signal)
            .into_par_iter()
            .map(|i| self.walk(start, &mut walk_rng(self.cfg.seed, signal, i)))
            .collect()
    }
}

/// Heaviest edge between the pair, then key order.
fn traversed_edge(g: &Graph, a: &NodeId, b: &NodeId) -> EdgeKey {
    g.edges_between(a, b)
        .map(|(e, _)| e)
        .max_by(|x, y| x.weight.total_cmp(&y.weight).then_with(|| y.key().cmp(&x.key())))
        .expect("neighbours share an edge")
        .key()
}

/// RNG stream for walk `ordinal` of `signal`.
pub fn walk_rng(seed: u64, signal: &str, ordinal: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((signal.len() as u64).to_le_bytes());
    h.update(signal.as_bytes());
    h.update((ordinal as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Convenience wrapper building a fresh engine.
pub fn run_walks(
    g: &Graph,
    start: &NodeId,
    signal: &str,
    arch_signals: &BTreeSet<NodeId>,
    cfg: &WalkConfig,
    tw: &TypeWeightTable,
) -> Result<Vec<WalkPath>, WalkError> {
    WalkEngine::new(g, arch_signals, cfg, tw)?.run_walks(start, signal)
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

    fn ids(v: &[&str]) -> BTreeSet<NodeId> {
        v.iter().map(|s| NodeId::from(*s)).collect()
    }

    #[test]
    fn importance_examples() {
        assert_eq!(importance_value(4, 4, 1.0), 1.0);
        assert_eq!(importance_value(0, 4, 1.0), 0.6);
        assert_eq!(importance_value(2, 4, 0.5), 0.5);
        assert_eq!(importance_value(0, 0, 1.0), 0.6);
    }

    #[test]
    fn direction_examples() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let t = g.next_hop_table(&ids(&["C"]));
        assert_eq!(direction_score(&t, &"A".into(), &"B".into(), &ids(&["C"])), 1.0);
        assert_eq!(direction_score(&t, &"B".into(), &"A".into(), &ids(&["C"])), 0.0);
        let t = g.next_hop_table(&ids(&["A", "C"]));
        assert_eq!(direction_score(&t, &"B".into(), &"C".into(), &ids(&["A", "C"])), 0.5);
    }

    #[test]
    fn uniform_fallback_and_normalization() {
        assert_eq!(normalize_scores(&[0.0; 4]), [0.25; 4]);
        assert_eq!(normalize_scores(&[0.5, 0.5]), [0.5, 0.5]);
        let p = normalize_scores(&[0.6, 0.2, 0.2]);
        assert!((p[0] - 0.6).abs() < 1e-12 && (p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dead_end_and_budget() {
        let g = graph(&["A", "B"], &[]);
        let e = WalkEngine::new(&g, &ids(&["A", "B"]), &WalkConfig::default(), &TypeWeightTable::default()).unwrap();
        let p = e.walk(&"A".into(), &mut walk_rng(1, "A", 0)).unwrap();
        assert_eq!((p.nodes.len(), p.terminated_by), (1, Termination::DeadEnd));

        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "A")]);
        let cfg = WalkConfig {
            step_budget: 1,
            ..Default::default()
        };
        let e = WalkEngine::new(&g, &ids(&["A", "Z"]), &cfg, &TypeWeightTable::default()).unwrap();
        let p = e.walk(&"A".into(), &mut walk_rng(1, "A", 0)).unwrap();
        assert!(p.nodes.len() <= 2);
        assert_eq!(p.edges.len(), p.nodes.len() - 1);
        assert!(matches!(e.walk(&"Q".into(), &mut walk_rng(1, "Q", 0)), Err(WalkError::StartNotFound(_))));
    }

    #[test]
    fn line_walk_finds_target_and_continues() {
        let g = graph(&["A", "B", "C", "D"], &[("A", "B"), ("B", "C"), ("C", "D")]);
        let e = WalkEngine::new(&g, &ids(&["A", "C", "D"]), &WalkConfig::default(), &TypeWeightTable::default()).unwrap();
        for i in 0..50 {
            let p = e.walk(&"A".into(), &mut walk_rng(7, "A", i)).unwrap();
            assert_eq!(p.nodes[0], NodeId::from("A"));
            assert!(p.nodes.len() <= 101);
            if p.terminated_by == Termination::AllSignalsFound {
                assert_eq!(p.discovered_signals, [NodeId::from("C"), NodeId::from("D")]);
            }
        }
    }

    #[test]
    fn run_walks_is_deterministic() {
        let g = graph(&["A", "B", "C", "D"], &[("A", "B"), ("B", "C"), ("B", "D"), ("C", "D")]);
        let cfg = WalkConfig::default();
        let a = run_walks(&g, &"A".into(), "A", &ids(&["A", "D"]), &cfg, &TypeWeightTable::default()).unwrap();
        let b = run_walks(&g, &"A".into(), "A", &ids(&["A", "D"]), &cfg, &TypeWeightTable::default()).unwrap();
        assert_eq!(a.len(), 70);
        assert_eq!(a, b);
    }
}
