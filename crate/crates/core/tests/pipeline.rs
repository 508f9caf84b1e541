mod common;

use std::process::Command;

use kgsva::pipeline::{cmd_build_kg, cmd_generate, cmd_refine_kg, cmd_report, layout, SignalStatus};

#[test]
fn rerun_is_served_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::uart_config(dir.path());
    let first = cmd_generate(&cfg).unwrap();
    assert!(first.signals.values().all(|s| *s != SignalStatus::Cached));
    let before = common::tree(dir.path(), &["manifest.json"]);

    let second = cmd_generate(&cfg).unwrap();
    assert!(second.signals.values().all(|s| *s == SignalStatus::Cached), "{:?}", second.signals);
    assert_eq!(first.report, second.report);
    assert_eq!(before, common::tree(dir.path(), &["manifest.json"]));
}

#[test]
fn report_matches_generate() {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_generate(&common::uart_config(dir.path())).unwrap();
    let (report, table) = cmd_report(dir.path()).unwrap();
    assert_eq!(report, s.report);
    assert_eq!(table, s.report.render_table());
    assert!(layout::report_txt(dir.path()).exists());
    // the malformed third assertion of the generic rule is counted, not dropped
    assert!(report.totals.total > report.totals.syntactically_correct);
    assert!(report.totals.with_unknown_signals >= 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let mut cfg = common::uart_config(dir.path());
    cfg.signals = vec!["no_such_signal".into()];
    assert_eq!(cmd_generate(&cfg).unwrap_err().exit_code(), 2);

    let bad = dir.path().join("bad.v");
    std::fs::write(&bad, "module broken(input a;\nendmodule\n").unwrap();
    let mut cfg = common::uart_config(&dir.path().join("parse"));
    cfg.inputs.rtl = vec![bad];
    cmd_build_kg(&cfg).unwrap();
    assert_eq!(cmd_refine_kg(&cfg).unwrap_err().exit_code(), 3);

    // unscripted prompts are echoed, so nothing parses as an assertion
    let empty = dir.path().join("silent");
    std::fs::create_dir(&empty).unwrap();
    let mut cfg = common::uart_config(&dir.path().join("empty"));
    cfg.provider.mock_dir = Some(empty);
    assert_eq!(cmd_generate(&cfg).unwrap_err().exit_code(), 5);

    let down = dir.path().join("down");
    std::fs::create_dir(&down).unwrap();
    for f in ["10_extraction.toml", "20_summaries.toml"] {
        std::fs::copy(common::fixtures().join("uart/mock").join(f), down.join(f)).unwrap();
    }
    std::fs::write(down.join("30_down.toml"), "[[reply]]\ncontains = [\"Generate natural language test plans\"]\nerror = \"quota exhausted\"\n").unwrap();
    let mut cfg = common::uart_config(&dir.path().join("provider"));
    cfg.provider.mock_dir = Some(down);
    assert_eq!(cmd_generate(&cfg).unwrap_err().exit_code(), 4);

    assert_eq!(cmd_report(&dir.path().join("missing")).unwrap_err().exit_code(), 1);
}

#[test]
fn cli_generate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let bin = env!("CARGO_BIN_EXE_kgsva");
    let config = common::fixtures().join("uart/config.toml");

    let out = Command::new(bin)
        .args(["generate", "-c"])
        .arg(&config)
        .arg("--run-dir")
        .arg(&run)
        .args(["--signals", "tx_busy,new_rx_data", "--walks", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("tx_busy") && stdout.contains("new_rx_data"));
    assert!(!stdout.contains("ser_out"));

    let out = Command::new(bin).arg("report").arg(&run).arg("--json").output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["per_signal"]["tx_busy"].is_object(), "{v}");

    let out = Command::new(bin).args(["generate", "-c"]).arg(&config).arg("--run-dir").arg(&run).args(["--signals", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
