//! Scores spec-side names against RTL identifiers.

use kgsva::matching::{match_score, AbbrevDict, MIN_MATCH_SCORE};

fn main() {
    let dict = AbbrevDict::shipped();
    let pairs = [
        ("transmit data valid", "tx_data_valid"),
        ("TX_DATA_VALID", "tx_data_valid"),
        ("reset", "rst"),
        ("baud limit", "baud_limit"),
        ("receive data", "rx_data"),
        ("interrupt", "ser_out"),
    ];
    for (spec, rtl) in pairs {
        let (score, method) = match_score(spec, rtl, &dict);
        let verdict = if score >= MIN_MATCH_SCORE { "link" } else { "-" };
        println!("{spec:>22} ~ {rtl:<14} {score:.2} {method:<12} {verdict}");
    }
}
