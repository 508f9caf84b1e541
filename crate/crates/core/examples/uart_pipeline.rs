//! Runs the whole flow on the uart fixture with the mock provider and
//! prints the report.

use std::path::Path;

use kgsva::pipeline::{cmd_generate, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/uart/config.toml"))?;
    let keep = std::env::args().nth(1);
    let tmp = tempfile::tempdir()?;
    cfg.run_dir = keep.as_ref().map_or_else(|| tmp.path().to_path_buf(), Into::into);

    let summary = cmd_generate(&cfg)?;
    print!("{}", summary.report.render_table());
    for (signal, status) in &summary.signals {
        println!("{signal}: {status:?}");
    }
    if keep.is_some() {
        println!("artifacts in {}", summary.run_dir.display());
    }
    Ok(())
}
