use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Counters, RunManifest, SignalStatus, StageRecord};
use super::stages::{arch_nodes, run_signal, SignalArtifacts, SignalEnv};
use super::{content_key, make_provider, to_json, write_atomic, CountingProvider, PipelineError, RunConfig};
use crate::context::ContextItem;
use crate::ingest::{build_initial_graph, ExtractionRecord, ExtractionStats, SpecDocument};
use crate::kg::{Graph, Schema};
use crate::llm::{prompt_token_limit, HeuristicCounter, LlmProvider};
use crate::matching::AbbrevDict;
use crate::refine::refine;
use crate::retrieval::{ChunkIndex, Document, HashingEmbedder, Source};
use crate::rtl::{extract_valid_signals, parse_design, RtlDesign};
use crate::sva::{annotate, batch_report, BatchReport};
use crate::synthesis::{generate_global_summaries, ContextCache, PromptBundle, SummaryInputs, SvaOutput};
use crate::template::PromptSet;
use crate::tokenize::WordTokenizer;
use crate::walk::{VerbTable, WalkEngine};

/// Artifact locations inside a run directory.
pub mod layout {
    use std::path::{Path, PathBuf};

    pub fn kg_dir(run: &Path) -> PathBuf {
        run.join("kg")
    }
    pub fn initial_graph(run: &Path) -> PathBuf {
        kg_dir(run).join("g0.json")
    }
    pub fn extraction_log(run: &Path) -> PathBuf {
        kg_dir(run).join("extraction.json")
    }
    pub fn graph(run: &Path) -> PathBuf {
        kg_dir(run).join("graph.json")
    }
    pub fn rtl_design(run: &Path) -> PathBuf {
        kg_dir(run).join("rtl_design.json")
    }
    pub fn match_report(run: &Path) -> PathBuf {
        kg_dir(run).join("match_report.json")
    }
    pub fn rtl_warnings(run: &Path) -> PathBuf {
        kg_dir(run).join("rtl_warnings.json")
    }
    pub fn valid_signals(run: &Path) -> PathBuf {
        run.join("signals.json")
    }
    pub fn summaries(run: &Path) -> PathBuf {
        run.join("summaries.json")
    }
    pub fn signal_dir(run: &Path, signal: &str) -> PathBuf {
        run.join("signals").join(signal)
    }
    pub fn report_json(run: &Path) -> PathBuf {
        run.join("report.json")
    }
    pub fn report_txt(run: &Path) -> PathBuf {
        run.join("report.txt")
    }
    pub fn cache(run: &Path) -> PathBuf {
        run.join("cache")
    }
    pub fn llm_cache(run: &Path) -> PathBuf {
        cache(run).join("llm")
    }
    pub fn context_cache(run: &Path) -> PathBuf {
        cache(run).join("contexts")
    }
    pub fn index_cache(run: &Path) -> PathBuf {
        cache(run).join("index")
    }
    pub const BUILD_KEY: &str = "build.key";
    pub const REFINE_KEY: &str = "refine.key";
    pub const SIGNAL_KEY: &str = "stage.key";
    pub const SIGNAL_FILES: [&str; 7] = [
        "walks.json",
        "candidates.json",
        "contexts.json",
        "prune_report.json",
        "prompts.json",
        "plans.json",
        "svas.json",
    ];
}

fn rel(run: &Path, p: &Path) -> String {
    p.strip_prefix(run).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn key_matches(key_file: &Path, key: &str, outputs: &[PathBuf]) -> bool {
    std::fs::read_to_string(key_file).is_ok_and(|k| k.trim() == key) && outputs.iter().all(|p| p.is_file())
}

fn prompts_for(cfg: &RunConfig) -> Result<PromptSet, PipelineError> {
    match &cfg.inputs.prompts_dir {
        Some(d) => PromptSet::with_overrides(d).map_err(|e| PipelineError::Config(e.to_string())),
        None => Ok(PromptSet::default()),
    }
}

fn prompts_bytes(p: &PromptSet) -> Vec<u8> {
    p.all().iter().flat_map(|t| [t.name().as_bytes(), b"\0", t.text().as_bytes(), b"\0"].concat()).collect()
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct ExtractionLog<'a> {
    records: &'a [ExtractionRecord],
    stats: ExtractionStats,
    summarized: usize,
}

/// Builds the initial specification graph.
pub fn cmd_build_kg(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    cfg.validate(true, false)?;
    let t0 = Instant::now();
    let run = &cfg.run_dir;
    let spec_bytes = read(&cfg.inputs.spec)?;
    let schema = match &cfg.inputs.schema {
        Some(p) => Schema::load(p).map_err(|e| PipelineError::Config(e.to_string()))?,
        None => Schema::hardware(),
    };
    let prompts = prompts_for(cfg)?;
    let (llm, ident) = make_provider(cfg)?;
    let schema_text = format!("{:?}|{:?}", schema.entity_types(), schema.relation_types());
    let ingest = serde_json::to_vec(&cfg.ingest).expect("config serializes");
    let key = content_key(&[
        b"build-kg-v1",
        &spec_bytes,
        schema_text.as_bytes(),
        prompts.entity_extraction.text().as_bytes(),
        prompts.description_summary.text().as_bytes(),
        &ingest,
        ident.as_bytes(),
    ]);
    let out_g0 = layout::initial_graph(run);
    let out_log = layout::extraction_log(run);
    let key_file = layout::kg_dir(run).join(layout::BUILD_KEY);
    let mut manifest = RunManifest::load_or_default(run);
    manifest.input_hashes.insert("spec".into(), content_key(&[&spec_bytes]));
    let cached = key_matches(&key_file, &key, &[out_g0.clone(), out_log.clone()]);
    if !cached {
        let doc = SpecDocument::load(&cfg.inputs.spec).map_err(|e| PipelineError::Config(e.to_string()))?;
        let counting = CountingProvider::new(llm);
        let out = build_initial_graph(&doc, &counting, &prompts, &schema, &WordTokenizer, &cfg.ingest)?;
        write_atomic(&out_g0, out.graph.to_json().as_bytes())?;
        let log = ExtractionLog {
            records: &out.records,
            stats: out.stats,
            summarized: out.summarized,
        };
        write_atomic(&out_log, to_json(&log).as_bytes())?;
        write_atomic(&key_file, key.as_bytes())?;
        manifest.counters.provider_calls += counting.calls();
    }
    manifest.record_stage(StageRecord {
        name: "build-kg".into(),
        key,
        cached,
        millis: t0.elapsed().as_millis() as u64,
    });
    manifest.add_artifact(rel(run, &out_g0));
    manifest.add_artifact(rel(run, &out_log));
    manifest.config = serde_json::to_value(cfg).expect("config serializes");
    manifest.save(run)?;
    Ok(out_g0)
}

fn load_graph(path: &Path, hint: &str) -> Result<(Graph, Vec<u8>), PipelineError> {
    let bytes = std::fs::read(path)
        .map_err(|_| PipelineError::Other(format!("no graph at {}; run {hint} first", path.display())))?;
    let text = String::from_utf8_lossy(&bytes);
    let g = Graph::from_json(&text).map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))?;
    Ok((g, bytes))
}

fn include_bytes_of(dirs: &[PathBuf]) -> Result<Vec<u8>, PipelineError> {
    let mut out = Vec::new();
    for d in dirs {
        let mut files: Vec<_> = std::fs::read_dir(d)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
        files.sort();
        for f in files {
            out.extend(file_name(&f).as_bytes());
            out.extend(std::fs::read(&f)?);
        }
    }
    Ok(out)
}

/// Parses the RTL and fuses it into the initial graph.
pub fn cmd_refine_kg(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    cfg.validate(false, true)?;
    let t0 = Instant::now();
    let run = &cfg.run_dir;
    let (g0, g0_bytes) = load_graph(&layout::initial_graph(run), "build-kg")?;
    let dict = match &cfg.inputs.abbreviations {
        Some(p) => AbbrevDict::load(p).map_err(|e| PipelineError::Config(e.to_string()))?,
        None => AbbrevDict::shipped(),
    };
    let mut parts: Vec<Vec<u8>> = vec![b"refine-kg-v1".to_vec(), g0_bytes];
    for f in &cfg.inputs.rtl {
        parts.push(file_name(f).into_bytes());
        parts.push(read(f)?);
    }
    parts.push(include_bytes_of(&cfg.inputs.include_dirs)?);
    parts.push(cfg.inputs.top.clone().unwrap_or_default().into_bytes());
    parts.push(serde_json::to_vec(dict.pairs()).expect("dict serializes"));
    let key = content_key(&parts.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let outs = [
        layout::graph(run),
        layout::rtl_design(run),
        layout::match_report(run),
        layout::rtl_warnings(run),
    ];
    let key_file = layout::kg_dir(run).join(layout::REFINE_KEY);
    let mut manifest = RunManifest::load_or_default(run);
    let cached = key_matches(&key_file, &key, &outs);
    if !cached {
        let (design, warnings) = parse_design(&cfg.inputs.rtl, &cfg.inputs.include_dirs, cfg.inputs.top.as_deref())
            .map_err(|e| PipelineError::Parse(e.to_string()))?;
        for w in &warnings {
            log::warn!("{w}");
        }
        let out = refine(&g0, &design, &dict).map_err(|e| PipelineError::Other(e.to_string()))?;
        write_atomic(&outs[0], out.graph.to_json().as_bytes())?;
        write_atomic(&outs[1], design.to_json().as_bytes())?;
        write_atomic(&outs[2], out.matches.to_json().as_bytes())?;
        write_atomic(&outs[3], to_json(&warnings).as_bytes())?;
        write_atomic(&key_file, key.as_bytes())?;
        manifest.counters.warnings = warnings.len();
    }
    for f in &cfg.inputs.rtl {
        manifest.input_hashes.insert(format!("rtl:{}", file_name(f)), content_key(&[&read(f)?]));
    }
    manifest.record_stage(StageRecord {
        name: "refine-kg".into(),
        key,
        cached,
        millis: t0.elapsed().as_millis() as u64,
    });
    for o in &outs {
        manifest.add_artifact(rel(run, o));
    }
    manifest.save(run)?;
    Ok(outs[0].clone())
}

fn load_design(run: &Path) -> Result<RtlDesign, PipelineError> {
    let path = layout::rtl_design(run);
    let text = std::fs::read_to_string(&path)
        .map_err(|_| PipelineError::Other(format!("no RTL design at {}; run refine-kg first", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidSignals {
    pub top: String,
    pub signals: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// Architectural signals of the refined design; writes `signals.json`.
pub fn cmd_extract_signals(cfg: &RunConfig) -> Result<ValidSignals, PipelineError> {
    let run = &cfg.run_dir;
    let (g, _) = load_graph(&layout::graph(run), "refine-kg")?;
    let design = load_design(run)?;
    let top = design
        .top
        .clone()
        .ok_or_else(|| PipelineError::Config("cannot determine the top module; set inputs.top".into()))?;
    let (signals, warnings) = extract_valid_signals(&design, &top, Some(&g)).map_err(|e| PipelineError::Parse(e.to_string()))?;
    let out = ValidSignals {
        top,
        signals,
        warnings: warnings.iter().map(ToString::to_string).collect(),
    };
    write_atomic(&layout::valid_signals(run), to_json(&out).as_bytes())?;
    let mut manifest = RunManifest::load_or_default(run);
    manifest.add_artifact(rel(run, &layout::valid_signals(run)));
    manifest.save(run)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub run_dir: PathBuf,
    pub report: BatchReport,
    pub signals: BTreeMap<String, SignalStatus>,
}

fn write_signal(dir: &Path, a: &SignalArtifacts) -> Result<(), PipelineError> {
    let files: [(&str, String); 7] = [
        ("walks.json", to_json(&a.walks)),
        ("candidates.json", to_json(&a.candidates)),
        ("contexts.json", to_json(&a.contexts)),
        ("prune_report.json", to_json(&a.prune_report)),
        ("prompts.json", to_json(&a.bundle)),
        ("plans.json", to_json(&a.plans)),
        ("svas.json", to_json(&a.svas)),
    ];
    for (name, body) in files {
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    for p in &a.bundle.prompts {
        write_atomic(&dir.join(format!("prompt_{}.txt", p.ordinal)), p.text.as_bytes())?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))
}

enum SignalOutcome {
    Fresh(Box<SignalArtifacts>),
    Cached { svas: SvaOutput, bundle: PromptBundle },
    Failed(String),
}

/// Runs every stage needed and generates plans and assertions per
/// architectural signal, then checks them and writes the report.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary, PipelineError> {
    cfg.validate(true, true)?;
    cmd_build_kg(cfg)?;
    cmd_refine_kg(cfg)?;
    let valid = cmd_extract_signals(cfg)?;
    let t0 = Instant::now();
    let run = &cfg.run_dir;
    let (graph, graph_bytes) = load_graph(&layout::graph(run), "refine-kg")?;
    let design = load_design(run)?;
    let selected: Vec<String> = if cfg.signals.is_empty() {
        valid.signals.iter().cloned().collect()
    } else {
        if let Some(s) = cfg.signals.iter().find(|s| !valid.signals.contains(*s)) {
            return Err(PipelineError::Config(format!(
                "signal {s} is not an architectural signal of {} (valid: {})",
                valid.top,
                valid.signals.iter().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
        let mut v = cfg.signals.clone();
        v.sort();
        v
    };
    if selected.is_empty() {
        return Err(PipelineError::EmptyResult(format!("top module {} exposes no architectural signals", valid.top)));
    }

    let prompts = prompts_for(cfg)?;
    let verbs = match &cfg.inputs.relation_verbs {
        Some(p) => VerbTable::load(p).map_err(PipelineError::Config)?,
        None => VerbTable::default(),
    };
    let (provider, ident) = make_provider(cfg)?;
    let llm = CountingProvider::new(provider);
    let token_limit = prompt_token_limit(llm.context_window());

    let spec_text = std::fs::read_to_string(&cfg.inputs.spec)?;
    let mut docs = vec![Document::new(file_name(&cfg.inputs.spec), spec_text.clone(), Source::Spec)];
    let mut rtl_text = String::new();
    for f in &cfg.inputs.rtl {
        let text = std::fs::read_to_string(f)?;
        rtl_text.push_str(&format!("// {}\n{}\n", file_name(f), text.trim_end()));
        docs.push(Document::new(file_name(f), text, Source::Rtl));
    }
    let index = ChunkIndex::cached(
        &layout::index_cache(run),
        &docs,
        &cfg.retrieval.grid,
        Arc::new(WordTokenizer),
        Arc::new(HashingEmbedder::default()),
        false,
    )
    .map_err(|e| PipelineError::Other(e.to_string()))?;

    let inputs = SummaryInputs {
        spec_text: &spec_text,
        rtl_text: &rtl_text,
        valid_signals: &valid.signals,
    };
    let cache = ContextCache::on_disk(layout::context_cache(run));
    let counter = HeuristicCounter;
    let summaries: Vec<ContextItem> = generate_global_summaries(&llm, &prompts, inputs, &cache, &counter, token_limit)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    write_atomic(&layout::summaries(run), to_json(&summaries).as_bytes())?;

    let arch = arch_nodes(&design, &valid.top, &graph, &valid.signals);
    let arch_ids = arch.values().cloned().collect();
    let walk_cfg = cfg.effective_walk();
    let engine = WalkEngine::new(&graph, &arch_ids, &walk_cfg, &cfg.type_weights).map_err(|e| PipelineError::Config(e.to_string()))?;
    let env = SignalEnv {
        cfg,
        graph: &graph,
        engine: &engine,
        arch: &arch,
        verbs: &verbs,
        index: &index,
        llm: &llm,
        prompts: &prompts,
        inputs,
        summaries: &summaries,
        cache: &cache,
        counter: &counter,
        token_limit,
    };

    let settings = serde_json::to_vec(&(
        &cfg.retrieval,
        &walk_cfg,
        &cfg.type_weights,
        &cfg.pruner,
        cfg.prompt_budget,
        token_limit,
    ))
    .expect("config serializes");
    let shared_key = content_key(&[
        b"generate-v1",
        &graph_bytes,
        spec_text.as_bytes(),
        rtl_text.as_bytes(),
        &settings,
        &prompts_bytes(&prompts),
        ident.as_bytes(),
        to_json(&summaries).as_bytes(),
        to_json(&valid.signals).as_bytes(),
    ]);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    let outcomes: Vec<(String, SignalOutcome)> = pool.install(|| {
        selected
            .par_iter()
            .map(|s| {
                let dir = layout::signal_dir(run, s);
                let key = content_key(&[shared_key.as_bytes(), s.as_bytes()]);
                let key_file = dir.join(layout::SIGNAL_KEY);
                let outs: Vec<PathBuf> = layout::SIGNAL_FILES.iter().map(|f| dir.join(f)).collect();
                if key_matches(&key_file, &key, &outs) {
                    let loaded = read_json(&dir.join("svas.json")).and_then(|svas| Ok((svas, read_json(&dir.join("prompts.json"))?)));
                    if let Ok((svas, bundle)) = loaded {
                        return (s.clone(), SignalOutcome::Cached { svas, bundle });
                    }
                }
                let outcome = match run_signal(&env, s) {
                    Ok(mut a) => {
                        annotate(&mut a.svas.records, &valid.signals, &design.scope_names());
                        match write_signal(&dir, &a).and_then(|_| write_atomic(&key_file, key.as_bytes())) {
                            Ok(()) => SignalOutcome::Fresh(Box::new(a)),
                            Err(e) => SignalOutcome::Failed(e.to_string()),
                        }
                    }
                    Err(e) => SignalOutcome::Failed(e.to_string()),
                };
                (s.clone(), outcome)
            })
            .collect()
    });

    let mut manifest = RunManifest::load_or_default(run);
    let mut records = Vec::new();
    let mut statuses = BTreeMap::new();
    let mut counters = Counters {
        provider_calls: manifest.counters.provider_calls,
        warnings: manifest.counters.warnings,
        degraded_contexts: summaries.iter().filter(|c| c.degraded).count(),
        ..Default::default()
    };
    let mut provider_failures = 0;
    for (s, o) in outcomes {
        let dir = layout::signal_dir(run, &s);
        let status = match o {
            SignalOutcome::Fresh(a) => {
                counters.dropped_contexts += a.bundle.dropped;
                counters.degraded_contexts += usize::from(a.description.degraded);
                provider_failures += a.provider_failures;
                let ok = a.succeeded();
                records.extend(a.svas.records);
                if ok {
                    SignalStatus::Ok
                } else {
                    SignalStatus::NoAssertions
                }
            }
            SignalOutcome::Cached { svas, bundle } => {
                counters.dropped_contexts += bundle.dropped;
                let ok = svas.records.iter().any(|r| !r.missing);
                records.extend(svas.records);
                if ok {
                    SignalStatus::Cached
                } else {
                    SignalStatus::NoAssertions
                }
            }
            SignalOutcome::Failed(m) => {
                log::error!("signal {s} failed: {m}");
                SignalStatus::Failed(m)
            }
        };
        if !matches!(status, SignalStatus::Failed(_)) {
            for f in layout::SIGNAL_FILES {
                manifest.add_artifact(rel(run, &dir.join(f)));
            }
        }
        if !matches!(status, SignalStatus::Ok | SignalStatus::Cached) {
            counters.failed_signals += 1;
        }
        statuses.insert(s, status);
    }
    counters.provider_calls += llm.calls();

    let report = batch_report(&records, &valid.signals, &design.scope_names());
    write_atomic(&layout::report_json(run), report.to_json().as_bytes())?;
    write_atomic(&layout::report_txt(run), report.render_table().as_bytes())?;
    for p in [layout::summaries(run), layout::report_json(run), layout::report_txt(run)] {
        manifest.add_artifact(rel(run, &p));
    }
    manifest.record_stage(StageRecord {
        name: "generate".into(),
        key: shared_key,
        cached: statuses.values().all(|s| *s == SignalStatus::Cached),
        millis: t0.elapsed().as_millis() as u64,
    });
    manifest.counters = counters;
    manifest.signals = statuses.clone();
    manifest.config = serde_json::to_value(cfg).expect("config serializes");
    manifest.save(run)?;

    let succeeded = statuses.values().filter(|s| matches!(s, SignalStatus::Ok | SignalStatus::Cached)).count();
    if succeeded == 0 {
        let msg = format!("none of {} signals produced an assertion", statuses.len());
        return Err(if provider_failures > 0 {
            PipelineError::Provider(msg)
        } else {
            PipelineError::EmptyResult(msg)
        });
    }
    Ok(GenerateSummary {
        run_dir: run.clone(),
        report,
        signals: statuses,
    })
}

/// Loads a finished run's report; returns it with the rendered table.
pub fn cmd_report(run_dir: &Path) -> Result<(BatchReport, String), PipelineError> {
    let manifest = RunManifest::load(run_dir)?;
    let path = layout::report_json(run_dir);
    if !manifest.artifacts.iter().any(|a| run_dir.join(a) == path) {
        return Err(PipelineError::Other(format!("run {} has no report; run generate first", run_dir.display())));
    }
    let report: BatchReport = read_json(&path)?;
    let table = report.render_table();
    Ok((report, table))
}
