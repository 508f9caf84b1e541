mod common;

use kgsva::sva::parse_sva;

#[test]
fn printed_and_malformed_corpus() {
    let problems = common::check_sva_corpus();
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

#[test]
fn printed_corpus_has_fifteen_entries() {
    assert_eq!(common::printed_svas().len(), 15);
}

#[test]
fn canonical_form_reparses_to_same_ast() {
    for (label, text) in common::printed_svas() {
        let a = parse_sva(&text).unwrap();
        let b = parse_sva(&a.to_string()).unwrap_or_else(|d| panic!("{label}: {d}"));
        assert_eq!(a, b, "{label}");
    }
}

#[test]
fn hierarchical_reference_is_kept() {
    let (_, text) = common::printed_svas().into_iter().find(|(l, _)| l.ends_with("p231")).unwrap();
    let a = parse_sva(&text).unwrap();
    assert!(a.referenced_signals.contains("cpu.NMI_handler"));
    assert!(a.disable_iff.is_some());
}
