//! Fusion of RTL facts into the specification graph.

use std::collections::BTreeMap;

use crate::kg::{Graph, GraphError, KgEdge, KgNode, NodeId, ATTR_ORIGIN, ORIGIN_RTL};
use crate::matching::{link_spec_to_rtl, AbbrevDict, MatchReport};
use crate::rtl::{dataflow_edges, ControlKind, ModuleFact, NetKind, RtlDesign, SignalRef};

pub fn module_id(m: &str) -> NodeId {
    NodeId::new(format!("rtl:module:{m}"))
}

pub fn port_id(m: &str, p: &str) -> NodeId {
    NodeId::new(format!("rtl:port:{m}.{p}"))
}

pub fn signal_id(m: &str, s: &str, kind: NetKind) -> NodeId {
    let k = if kind == NetKind::Reg { "register" } else { "signal" };
    NodeId::new(format!("rtl:{k}:{m}.{s}"))
}

pub fn instance_id(m: &str, i: &str) -> NodeId {
    NodeId::new(format!("rtl:instance:{m}.{i}"))
}

pub fn fsm_id(m: &str, state: &str) -> NodeId {
    NodeId::new(format!("rtl:fsm:{m}.{state}"))
}

fn rtl_node(id: NodeId, name: &str, kind: &str, module: Option<&str>) -> KgNode {
    let mut n = KgNode::new(id, name, kind).with_attr(ATTR_ORIGIN, ORIGIN_RTL);
    n.module = module.map(str::to_string);
    n
}

fn width_attr(w: Option<u64>) -> String {
    w.map_or_else(|| "unknown".to_string(), |w| w.to_string())
}

/// Node id of a declared port or signal, if any.
fn signal_node(design: &RtlDesign, r: &SignalRef) -> Option<NodeId> {
    let m = design.module(&r.module)?;
    if m.port(&r.name).is_some() {
        return Some(port_id(&m.name, &r.name));
    }
    m.signal(&r.name).map(|s| signal_id(&m.name, &s.name, s.kind))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput {
    pub graph: Graph,
    pub matches: MatchReport,
    /// Root node added to connect components, if one was needed.
    pub root: Option<NodeId>,
}

struct Builder<'a> {
    g: Graph,
    design: &'a RtlDesign,
}

impl Builder<'_> {
    fn node(&mut self, n: KgNode) -> Result<(), GraphError> {
        self.g.add_node(n).map(|_| ())
    }

    fn edge(&mut self, src: &NodeId, dst: &NodeId, rel: &str, desc: String) -> Result<(), GraphError> {
        self.g
            .add_edge(KgEdge::new(src.clone(), dst.clone(), rel).with_description(desc))
            .map(|_| ())
    }

    fn local(&self, m: &ModuleFact, name: &str) -> Option<NodeId> {
        signal_node(self.design, &SignalRef::new(&m.name, name))
    }

    fn declare(&mut self, m: &ModuleFact) -> Result<(), GraphError> {
        let mid = module_id(&m.name);
        self.node(
            rtl_node(mid.clone(), &m.name, "module", None)
                .with_attr("file", m.file.clone())
                .with_source(m.source_span.clone()),
        )?;
        for p in &m.ports {
            let id = port_id(&m.name, &p.name);
            self.node(
                rtl_node(id.clone(), &p.name, "port", Some(&m.name))
                    .with_attr("direction", p.direction.to_string())
                    .with_attr("width", width_attr(p.width()))
                    .with_attr("kind", format!("{:?}", p.kind).to_lowercase())
                    .with_description(format!("{} port of {}", p.direction, m.name)),
            )?;
            self.edge(&mid, &id, "contains", format!("{} has port {}", m.name, p.name))?;
        }
        for s in &m.internal_signals {
            let id = signal_id(&m.name, &s.name, s.kind);
            let kind = if s.kind == NetKind::Reg { "register" } else { "signal" };
            let mut n = rtl_node(id.clone(), &s.name, kind, Some(&m.name))
                .with_attr("width", width_attr(s.width()))
                .with_attr("kind", format!("{:?}", s.kind).to_lowercase());
            if s.implicit {
                n = n.with_attr("implicit", "true");
            }
            self.node(n)?;
            self.edge(&mid, &id, "contains", format!("{} declares {}", m.name, s.name))?;
        }
        Ok(())
    }

    /// Instances, state machines, branches and assignments. Runs after
    /// every module is declared so instance edges find their targets.
    fn structure(&mut self, m: &ModuleFact) -> Result<(), GraphError> {
        let mid = module_id(&m.name);
        for inst in &m.instances {
            let id = instance_id(&m.name, &inst.name);
            self.node(
                rtl_node(id.clone(), &inst.name, "instance", Some(&m.name))
                    .with_attr("module_name", inst.module_name.clone())
                    .with_source(inst.source_span.clone()),
            )?;
            self.edge(&mid, &id, "contains", format!("{} instantiates {} as {}", m.name, inst.module_name, inst.name))?;
            let sub = module_id(&inst.module_name);
            if self.design.module(&inst.module_name).is_none() {
                self.node(rtl_node(sub.clone(), &inst.module_name, "module", None).with_attr("external", "true"))?;
            }
            self.edge(&id, &sub, "instantiates", format!("{} is an instance of {}", inst.name, inst.module_name))?;
            for (formal, actuals) in &inst.connections {
                if self.design.module(&inst.module_name).and_then(|s| s.port(formal)).is_some() {
                    let fp = port_id(&inst.module_name, formal);
                    self.edge(&id, &fp, "connects_port", format!("{}.{formal}", inst.name))?;
                }
                for a in actuals {
                    if let Some(aid) = self.local(m, a) {
                        self.edge(&aid, &id, "connects_port", format!("{a} connects to {}.{formal}", inst.name))?;
                    }
                }
            }
        }
        for f in &m.fsms {
            let id = fsm_id(&m.name, &f.state_signal);
            let detection = serde_json::to_value(f.detection)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let mut n = rtl_node(id.clone(), &f.state_signal, "fsm", Some(&m.name)).with_attr("detection", detection);
            if !f.clock_signal.is_empty() {
                n = n.with_attr("clock", f.clock_signal.clone());
            }
            if !f.source_span.is_empty() {
                n = n.with_source(f.source_span.clone());
            }
            self.node(n)?;
            self.edge(&id, &mid, "has_fsm", format!("state machine of {}", m.name))?;
            if let Some(sid) = self.local(m, &f.state_signal) {
                self.edge(&sid, &id, "has_fsm", format!("{} holds the state", f.state_signal))?;
            }
        }
        for (k, cf) in m.control_flows.iter().enumerate() {
            let kind = match cf.kind {
                ControlKind::IfElse => "if_else",
                ControlKind::Case => "case",
                ControlKind::Loop => "loop",
            };
            let id = NodeId::new(format!("rtl:cf:{}.{k}", m.name));
            self.node(
                rtl_node(id.clone(), &format!("{kind}_{k}"), "control_flow", Some(&m.name))
                    .with_attr("kind", kind)
                    .with_source(cf.source_span.clone()),
            )?;
            self.edge(&mid, &id, "contains", format!("{kind} in {}", m.name))?;
            for c in &cf.condition_signals {
                if let Some(cid) = self.local(m, c) {
                    self.edge(&cid, &id, "controls", format!("{c} selects a branch"))?;
                }
            }
            for l in &cf.governed_lhs {
                if let Some(lid) = self.local(m, l) {
                    self.edge(&id, &lid, "controls", format!("{l} assigned under {kind}"))?;
                }
            }
        }
        for (k, a) in m.assignments.iter().enumerate() {
            let id = NodeId::new(format!("rtl:assign:{}.{k}", m.name));
            let style = if a.continuous {
                "continuous"
            } else if a.blocking {
                "blocking"
            } else {
                "non_blocking"
            };
            self.node(
                rtl_node(id.clone(), &format!("{}_assignment", a.lhs), "assignment", Some(&m.name))
                    .with_attr("style", style)
                    .with_source(a.source_span.clone()),
            )?;
            self.edge(&mid, &id, "contains", format!("assignment in {}", m.name))?;
            if let Some(lid) = self.local(m, &a.lhs) {
                self.edge(&id, &lid, "assigns_to", format!("{style} assignment to {}", a.lhs))?;
            }
            for r in &a.rhs_signals {
                if let Some(rid) = self.local(m, r) {
                    self.edge(&rid, &id, "uses_in_rhs", format!("{r} read by assignment to {}", a.lhs))?;
                }
            }
        }
        Ok(())
    }
}

/// Adds RTL structure to `g0`, connects the graph, then links spec
/// signal mentions to RTL ports and signals. Nodes of `g0` are kept as
/// they are.
pub fn refine(g0: &Graph, design: &RtlDesign, dict: &AbbrevDict) -> Result<RefineOutput, GraphError> {
    let mut b = Builder { g: g0.clone(), design };
    for m in design.modules.values() {
        b.declare(m)?;
    }
    for m in design.modules.values() {
        b.structure(m)?;
    }
    let mut flow: BTreeMap<(NodeId, NodeId), String> = BTreeMap::new();
    for e in dataflow_edges(design) {
        if let (Some(s), Some(d)) = (signal_node(design, &e.driver), signal_node(design, &e.driven)) {
            flow.entry((s, d)).or_insert(e.in_module);
        }
    }
    for ((s, d), m) in flow {
        b.edge(&s, &d, "drives", format!("dataflow in {m}"))?;
    }
    let root = b.g.ensure_connected();
    let mut graph = b.g;
    let matches = link_spec_to_rtl(&graph, dict);
    for r in &matches.matches {
        graph.add_edge(
            KgEdge::new(r.rtl_node.clone(), r.spec_node.clone(), "links_to_spec")
                .with_weight(r.score)
                .with_description(format!("{} match ({:.1})", r.method, r.score)),
        )?;
    }
    Ok(RefineOutput { graph, matches, root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::ORIGIN_SPEC;
    use crate::rtl::parse_sources;

    fn design(src: &str) -> RtlDesign {
        parse_sources(&[("d.v", src)], None).unwrap().0
    }

    #[test]
    fn single_module_counts() {
        let d = design("module m(input a, output b); endmodule");
        let out = refine(&Graph::new(), &d, &AbbrevDict::shipped()).unwrap();
        assert_eq!(out.graph.node_count(), 3);
        assert_eq!(out.graph.edge_count(), 2);
        assert!(out.graph.edges().all(|e| e.relation.as_str() == "contains"));
        assert!(out.root.is_none());
    }

    #[test]
    fn exact_spec_link() {
        let mut g0 = Graph::new();
        g0.add_node(KgNode::new("spec::Signal::pclk", "PCLK", "Signal").with_attr(ATTR_ORIGIN, ORIGIN_SPEC))
            .unwrap();
        let d = design("module apb(input PCLK); endmodule");
        let out = refine(&g0, &d, &AbbrevDict::shipped()).unwrap();
        let link = out.graph.edges().find(|e| e.relation.as_str() == "links_to_spec").unwrap();
        assert_eq!(link.weight, 1.0);
        assert_eq!(link.src, port_id("apb", "PCLK"));
        // spec node kept, graph connected through the root
        assert!(out.root.is_some());
        assert_eq!(out.graph.node(&NodeId::new("spec::Signal::pclk")).unwrap().name, "PCLK");
    }

    #[test]
    fn parent_sorting_before_child() {
        let d = design(
            "module a_top(input x, output y); z_leaf u(.i(x), .o(y)); endmodule
             module z_leaf(input i, output o); assign o = i; endmodule",
        );
        let g = refine(&Graph::new(), &d, &AbbrevDict::shipped()).unwrap().graph;
        assert!(g.edges().any(|e| e.src == instance_id("a_top", "u") && e.dst == module_id("z_leaf")));
    }

    #[test]
    fn fsm_and_dataflow_edges() {
        let d = design(
            "module sub(input din, output dout); assign dout = din; endmodule
             module top(input clk, input x, output w);
               reg [1:0] state;
               always @(posedge clk) case (state) 2'd0: state <= 2'd1; default: state <= 2'd0; endcase
               sub u1(.din(x), .dout(w));
             endmodule",
        );
        let out = refine(&Graph::new(), &d, &AbbrevDict::shipped()).unwrap();
        let g = &out.graph;
        let has = |s: NodeId, d: NodeId, r: &str| g.edges().any(|e| e.src == s && e.dst == d && e.relation.as_str() == r);
        assert!(has(fsm_id("top", "state"), module_id("top"), "has_fsm"));
        assert!(has(port_id("top", "x"), port_id("sub", "din"), "drives"));
        assert!(has(port_id("sub", "dout"), port_id("top", "w"), "drives"));
        assert!(has(instance_id("top", "u1"), module_id("sub"), "instantiates"));
        assert_eq!(g.components().len(), 1);
    }
}
