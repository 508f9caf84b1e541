use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kgsva::pipeline::{
    cmd_build_kg, cmd_extract_signals, cmd_generate, cmd_refine_kg, cmd_report, PipelineError, ProviderKind, RunConfig,
};

#[derive(Parser)]
#[command(name = "kgsva", version, about = "Generate SystemVerilog assertions from a spec and its RTL")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract the initial knowledge graph from the specification.
    BuildKg(RunArgs),
    /// Parse the RTL and fuse it into the graph.
    RefineKg(RunArgs),
    /// List the architectural signals of the top module.
    ExtractSignals(RunArgs),
    /// Run every stage and generate assertions.
    Generate(RunArgs),
    /// Print the report of a finished run.
    Report {
        /// Run directory.
        run_dir: PathBuf,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the scripted mock provider from this directory.
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Comma-separated signals to generate for.
    #[arg(long, value_delimiter = ',')]
    signals: Vec<String>,
    #[arg(long)]
    top: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    walks: Option<usize>,
    /// Prompts per signal.
    #[arg(long)]
    budget: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(d) = &self.run_dir {
            cfg.run_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.mock {
            cfg.provider.kind = ProviderKind::Mock;
            cfg.provider.mock_dir = Some(m.clone());
        }
        if !self.signals.is_empty() {
            cfg.signals = self.signals.clone();
        }
        if let Some(t) = &self.top {
            cfg.inputs.top = Some(t.clone());
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(w) = self.walks {
            cfg.walk.walks_per_signal = w;
        }
        if let Some(b) = self.budget {
            cfg.prompt_budget = b;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.cmd {
        Cmd::BuildKg(a) => {
            let p = cmd_build_kg(&a.config()?)?;
            println!("{}", p.display());
        }
        Cmd::RefineKg(a) => {
            let p = cmd_refine_kg(&a.config()?)?;
            println!("{}", p.display());
        }
        Cmd::ExtractSignals(a) => {
            let cfg = a.config()?;
            cmd_refine_kg(&cfg)?;
            let v = cmd_extract_signals(&cfg)?;
            for w in &v.warnings {
                log::warn!("{w}");
            }
            for s in &v.signals {
                println!("{s}");
            }
        }
        Cmd::Generate(a) => {
            let s = cmd_generate(&a.config()?)?;
            print!("{}", s.report.render_table());
            println!("run directory: {}", s.run_dir.display());
        }
        Cmd::Report { run_dir, json } => {
            let (report, table) = cmd_report(&run_dir)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{table}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
