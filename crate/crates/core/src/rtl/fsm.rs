use std::collections::BTreeMap;

use super::{FsmDetection, FsmFact, ModuleFact};

/// Lowercase name patterns that mark a state register.
pub(crate) fn is_state_like(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n.contains("state")
        || n.contains("fsm")
        || n.starts_with("st_")
        || n.starts_with("current")
        || n.starts_with("next_")
}

/// Finds FSM state signals by two strategies: clocked always blocks that
/// switch on a case subject, and state-like internal signal names.
pub fn detect_fsms(m: &ModuleFact) -> Vec<FsmFact> {
    let mut found: BTreeMap<String, FsmFact> = BTreeMap::new();
    for blk in m.always_blocks.iter().filter(|b| b.is_clocked()) {
        let Some(clock) = blk.events.iter().find(|e| !e.edge.is_empty()) else {
            continue;
        };
        for subject in &blk.case_subjects {
            found.entry(subject.clone()).or_insert_with(|| FsmFact {
                state_signal: subject.clone(),
                clock_signal: clock.signal.clone(),
                in_module: m.name.clone(),
                detection: FsmDetection::ClockedCase,
                source_span: blk.source_span.clone(),
            });
        }
    }
    for s in m.internal_signals.iter().filter(|s| is_state_like(&s.name)) {
        match found.get_mut(&s.name) {
            Some(f) => f.detection = FsmDetection::Both,
            None => {
                found.insert(
                    s.name.clone(),
                    FsmFact {
                        state_signal: s.name.clone(),
                        clock_signal: String::new(),
                        in_module: m.name.clone(),
                        detection: FsmDetection::NamePattern,
                        source_span: String::new(),
                    },
                );
            }
        }
    }
    found.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::super::parse_rtl;
    use super::*;

    fn fsms(src: &str) -> Vec<FsmFact> {
        parse_rtl(src, "f.v").unwrap().modules.remove(0).fsms
    }

    #[test]
    fn clocked_case_on_state_name_is_both() {
        let f = fsms(
            "module m(input clk, output reg y);
               reg [1:0] current_state;
               always @(posedge clk) case (current_state) 2'd0: y <= 1; default: y <= 0; endcase
             endmodule",
        );
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].state_signal, "current_state");
        assert_eq!(f[0].clock_signal, "clk");
        assert_eq!(f[0].detection, FsmDetection::Both);
        assert_eq!(f[0].source_span, "f.v:3");
    }

    #[test]
    fn clocked_case_on_plain_name() {
        let f = fsms(
            "module m(input clk, input [1:0] mode, output reg y);
               always @(negedge clk) case (mode) 2'd0: y <= 1; default: y <= 0; endcase
             endmodule",
        );
        assert_eq!((f[0].state_signal.as_str(), f[0].detection), ("mode", FsmDetection::ClockedCase));
    }

    #[test]
    fn name_pattern_only() {
        let f = fsms("module m(input clk); reg st_tx; endmodule");
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].detection, FsmDetection::NamePattern);
        assert!(f[0].clock_signal.is_empty());
    }

    #[test]
    fn combinational_mux_is_not_fsm() {
        let f = fsms(
            "module m(input [1:0] sel, input a, b, output reg y);
               always @(*) case (sel) 2'd0: y = a; default: y = b; endcase
             endmodule",
        );
        assert!(f.is_empty());
    }
}
