//! Builds the refined uart graph and runs signal-guided walks from one
//! architectural signal.

use std::collections::BTreeSet;
use std::path::Path;

use kgsva::kg::Graph;
use kgsva::pipeline::{cmd_build_kg, cmd_extract_signals, cmd_refine_kg, layout, signal_node, RunConfig};
use kgsva::rtl::RtlDesign;
use kgsva::walk::{path_to_text, TypeWeightTable, VerbTable, WalkConfig, WalkEngine, DISPLAY_CAP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let mut cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/uart/config.toml"))?;
    cfg.run_dir = tmp.path().to_path_buf();
    cmd_build_kg(&cfg)?;
    cmd_refine_kg(&cfg)?;
    let valid = cmd_extract_signals(&cfg)?;

    let g = Graph::from_json(&std::fs::read_to_string(layout::graph(tmp.path()))?)?;
    let design: RtlDesign = serde_json::from_str(&std::fs::read_to_string(layout::rtl_design(tmp.path()))?)?;
    let targets: BTreeSet<_> = valid.signals.iter().filter_map(|s| signal_node(&design, &valid.top, s)).collect();

    let signal = "tx_busy";
    let start = signal_node(&design, &valid.top, signal).ok_or("tx_busy not in the top module")?;
    let walk = WalkConfig {
        walks_per_signal: 4,
        step_budget: 12,
        ..Default::default()
    };
    let engine = WalkEngine::new(&g, &targets, &walk, &TypeWeightTable::default())?;
    for p in engine.run_walks(&start, signal)? {
        let text = path_to_text(&g, &p, &VerbTable::default(), DISPLAY_CAP);
        println!("{text}\n");
    }
    Ok(())
}
