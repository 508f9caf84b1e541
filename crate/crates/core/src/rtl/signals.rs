use std::collections::BTreeSet;

use super::{Diagnostic, NetKind, RtlDesign, RtlError};
use crate::kg::Graph;

/// Modules that no other parsed module instantiates. With several
/// candidates the one with the largest instance tree wins, ties broken by
/// name.
pub fn infer_top(design: &RtlDesign) -> Option<String> {
    let instantiated: BTreeSet<&str> = design
        .modules
        .values()
        .flat_map(|m| m.instances.iter().map(|i| i.module_name.as_str()))
        .collect();
    design
        .modules
        .keys()
        .filter(|k| !instantiated.contains(k.as_str()))
        .map(|k| (subtree_size(design, k, &mut Vec::new()), k))
        .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        .map(|(_, k)| k.clone())
}

fn subtree_size(design: &RtlDesign, module: &str, stack: &mut Vec<String>) -> usize {
    if stack.iter().any(|s| s == module) {
        return 0;
    }
    let Some(m) = design.module(module) else {
        return 0;
    };
    stack.push(module.to_string());
    let n = m
        .instances
        .iter()
        .map(|i| 1 + subtree_size(design, &i.module_name, stack))
        .sum();
    stack.pop();
    n
}

/// Signal names the generator may reference: every port of the top
/// module, plus top-level registers whose name exactly matches a
/// specification node when a graph is given.
pub fn extract_valid_signals(
    design: &RtlDesign,
    top: &str,
    spec_graph: Option<&Graph>,
) -> Result<(BTreeSet<String>, Vec<Diagnostic>), RtlError> {
    let m = design
        .module(top)
        .ok_or_else(|| RtlError::UnknownTop(top.to_string()))?;
    let mut warnings = Vec::new();
    let mut out: BTreeSet<String> = m.ports.iter().map(|p| p.name.clone()).collect();
    if m.ports.is_empty() {
        warnings.push(Diagnostic {
            span: m.source_span.clone(),
            message: format!("top module {top} has no ports; no valid signals"),
        });
    }
    if let Some(g) = spec_graph {
        let spec_names: BTreeSet<&str> = g.nodes().filter(|n| n.is_spec()).map(|n| n.name.as_str()).collect();
        for s in &m.internal_signals {
            if s.kind == NetKind::Reg && spec_names.contains(s.name.as_str()) {
                out.insert(s.name.clone());
            }
        }
    }
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::super::parse_sources;
    use super::*;
    use crate::kg::{KgNode, ATTR_ORIGIN, ORIGIN_SPEC};

    const SRC: &str = "module sub(input a); endmodule
        module uart_top(input clock, input reset, output tx_busy);
          reg baud_count; reg tx_state;
          sub u(.a(clock));
        endmodule";

    #[test]
    fn top_is_inferred_and_ports_returned() {
        let (d, _) = parse_sources(&[("u.v", SRC)], None).unwrap();
        assert_eq!(d.top.as_deref(), Some("uart_top"));
        let (s, w) = extract_valid_signals(&d, "uart_top", None).unwrap();
        assert_eq!(s, BTreeSet::from(["clock".into(), "reset".into(), "tx_busy".into()]));
        assert!(w.is_empty());
    }

    #[test]
    fn registers_need_exact_spec_match() {
        let (d, _) = parse_sources(&[("u.v", SRC)], None).unwrap();
        let mut g = Graph::new();
        g.add_node(KgNode::new("spec::Register::tx_state", "tx_state", "Register").with_attr(ATTR_ORIGIN, ORIGIN_SPEC))
            .unwrap();
        let (s, _) = extract_valid_signals(&d, "uart_top", Some(&g)).unwrap();
        assert!(s.contains("tx_state"));
        assert!(!s.contains("baud_count"));
    }

    #[test]
    fn unknown_top_and_portless() {
        let (d, _) = parse_sources(&[("u.v", SRC)], None).unwrap();
        assert!(matches!(extract_valid_signals(&d, "nope", None), Err(RtlError::UnknownTop(_))));
        let (d, _) = parse_sources(&[("e.v", "module e; endmodule")], None).unwrap();
        let (s, w) = extract_valid_signals(&d, "e", None).unwrap();
        assert!(s.is_empty());
        assert_eq!(w.len(), 1);
    }
}
