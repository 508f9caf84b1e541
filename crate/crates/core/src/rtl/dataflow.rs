use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Direction, RtlDesign};

/// A signal qualified by the module that declares it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignalRef {
    pub module: String,
    pub name: String,
}

impl SignalRef {
    pub fn new(module: &str, name: &str) -> Self {
        SignalRef {
            module: module.to_string(),
            name: name.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Assign,
    Port,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataflowEdge {
    pub driver: SignalRef,
    pub driven: SignalRef,
    /// Module whose text establishes the edge (the instantiating module
    /// for port flow).
    pub in_module: String,
    pub kind: FlowKind,
}

/// Direct driver→driven pairs: one per assignment rhs signal, plus flow
/// through instance port connections. No transitive closure is taken.
pub fn dataflow_edges(design: &RtlDesign) -> Vec<DataflowEdge> {
    let mut out = BTreeSet::new();
    for m in design.modules.values() {
        for a in &m.assignments {
            for r in &a.rhs_signals {
                out.insert(DataflowEdge {
                    driver: SignalRef::new(&m.name, r),
                    driven: SignalRef::new(&m.name, &a.lhs),
                    in_module: m.name.clone(),
                    kind: FlowKind::Assign,
                });
            }
        }
        for inst in &m.instances {
            let Some(sub) = design.module(&inst.module_name) else {
                continue;
            };
            for (formal, actuals) in &inst.connections {
                let Some(port) = sub.port(formal) else {
                    continue;
                };
                let inner = SignalRef::new(&sub.name, formal);
                for actual in actuals {
                    let outer = SignalRef::new(&m.name, actual);
                    let mut push = |driver: &SignalRef, driven: &SignalRef| {
                        out.insert(DataflowEdge {
                            driver: driver.clone(),
                            driven: driven.clone(),
                            in_module: m.name.clone(),
                            kind: FlowKind::Port,
                        });
                    };
                    match port.direction {
                        Direction::Input => push(&outer, &inner),
                        Direction::Output => push(&inner, &outer),
                        Direction::Inout => {
                            push(&outer, &inner);
                            push(&inner, &outer);
                        }
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::super::parse_sources;
    use super::*;

    fn pairs(src: &str) -> Vec<(String, String)> {
        let (d, _) = parse_sources(&[("d.v", src)], None).unwrap();
        dataflow_edges(&d)
            .into_iter()
            .map(|e| (format!("{}.{}", e.driver.module, e.driver.name), format!("{}.{}", e.driven.module, e.driven.name)))
            .collect()
    }

    #[test]
    fn assign_and_chain_without_closure() {
        let p = pairs("module m(input a, output c); wire b; assign b = a; assign c = b; endmodule");
        assert_eq!(p, [("m.a".into(), "m.b".into()), ("m.b".into(), "m.c".into())]);
    }

    #[test]
    fn port_directions() {
        let p = pairs(
            "module sub(input din, output dout); assign dout = din; endmodule
             module top(input x, output w); sub u1(.din(x), .dout(w)); endmodule",
        );
        assert!(p.contains(&("top.x".into(), "sub.din".into())));
        assert!(p.contains(&("sub.dout".into(), "top.w".into())));
        assert!(!p.contains(&("top.x".into(), "top.w".into())));
    }

    #[test]
    fn self_loop_only_when_written() {
        let p = pairs("module m(input clk, output reg q); always @(posedge clk) q <= ~q; endmodule");
        assert_eq!(p, [("m.q".into(), "m.q".into())]);
        let p = pairs("module m(input d, output y); assign y = d; endmodule");
        assert!(p.iter().all(|(a, b)| a != b));
    }
}
