//! Parses and checks assertions against a valid-signal set.

use std::collections::BTreeSet;

use kgsva::sva::{check_text, parse_sva};

fn main() {
    let valid: BTreeSet<String> = ["clock", "reset", "tx_busy", "new_tx_data", "ser_out"].map(String::from).into();
    let scopes = BTreeSet::new();
    let candidates = [
        "@(posedge clock) disable iff (reset) new_tx_data && !tx_busy |=> tx_busy;",
        "property p_idle;\n  @(posedge clock) !tx_busy |-> ##1 ser_out == 1'b1;\nendproperty",
        "@(posedge clock) rx_busy |=> ser_out;",
        "@(posedge clock) tx_busy |-> |-> ser_out;",
    ];
    for text in candidates {
        let v = check_text(text, &valid, &scopes);
        println!("{text}");
        if let Ok(ast) = parse_sva(text) {
            println!("  canonical: {ast}");
        }
        for d in &v.diagnostics {
            println!("  syntax error: {d}");
        }
        if !v.unknown_signals.is_empty() {
            println!("  unknown signals: {:?}", v.unknown_signals);
        }
    }
}
