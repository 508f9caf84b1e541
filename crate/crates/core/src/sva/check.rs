use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{parse_sva, Diagnostic, SvaAst};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub syntax_ok: bool,
    pub unknown_signals: BTreeSet<String>,
    /// Hierarchical names under a known module or instance; warned only.
    pub hierarchical: BTreeSet<String>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Compares the names an assertion reads against the valid-signal set.
/// `scopes` holds module and instance names that may head a
/// hierarchical reference.
pub fn check(ast: &SvaAst, valid: &BTreeSet<String>, scopes: &BTreeSet<String>) -> CheckVerdict {
    let mut v = CheckVerdict {
        syntax_ok: true,
        ..Default::default()
    };
    for s in &ast.referenced_signals {
        if valid.contains(s) {
            continue;
        }
        match s.split_once('.') {
            Some((head, _)) if scopes.contains(head) => {
                v.hierarchical.insert(s.clone());
            }
            _ => {
                v.unknown_signals.insert(s.clone());
            }
        }
    }
    v
}

pub fn check_text(text: &str, valid: &BTreeSet<String>, scopes: &BTreeSet<String>) -> CheckVerdict {
    match parse_sva(text) {
        Ok(ast) => check(&ast, valid, scopes),
        Err(d) => CheckVerdict {
            syntax_ok: false,
            diagnostics: vec![d],
            ..Default::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unknowns_and_hierarchy() {
        let valid = set(&["clock", "tx_busy", "new_tx_data", "mclk", "nmi", "puc_rst"]);
        let v = check_text("@(posedge clock) (!tx_busy && new_tx_data) |-> ##1 tx_busy", &valid, &BTreeSet::new());
        assert!(v.syntax_ok && v.unknown_signals.is_empty());
        let v = check_text("@(posedge clock) ghost_sig |-> tx_busy", &valid, &BTreeSet::new());
        assert!(v.syntax_ok);
        assert_eq!(v.unknown_signals, set(&["ghost_sig"]));
        let a231 = "@(posedge mclk) disable iff (puc_rst) $rose(nmi) |-> $rose(cpu.NMI_handler)";
        let v = check_text(a231, &valid, &set(&["cpu"]));
        assert!(v.unknown_signals.is_empty());
        assert_eq!(v.hierarchical, set(&["cpu.NMI_handler"]));
        let v = check_text(a231, &valid, &BTreeSet::new());
        assert_eq!(v.unknown_signals, set(&["cpu.NMI_handler"]));
    }

    #[test]
    fn failure_has_diagnostic() {
        let v = check_text("@(posedge clk", &BTreeSet::new(), &BTreeSet::new());
        assert!(!v.syntax_ok);
        assert_eq!(v.diagnostics.len(), 1);
    }
}
