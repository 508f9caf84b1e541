//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use kgsva::kg::{Graph, KgEdge, KgNode};
use kgsva::pipeline::RunConfig;
use kgsva::rtl::{parse_sources, ModuleFact};
use rand::Rng;
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Hand-written expectations for one corpus module.
#[derive(Debug, Deserialize)]
pub struct Golden {
    pub module: String,
    pub ports: Vec<String>,
    pub signals: Vec<String>,
    pub instances: Vec<String>,
    pub assignments: Vec<String>,
    pub control: Vec<String>,
    pub fsms: Vec<String>,
    pub warnings: usize,
}

fn join(s: &BTreeSet<String>) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(",")
}

fn width(w: Option<u64>) -> String {
    w.map_or_else(|| "?".into(), |w| w.to_string())
}

/// Facts of `m` in the golden file's notation.
pub fn summarize(m: &ModuleFact, warnings: usize) -> Golden {
    Golden {
        module: m.name.clone(),
        ports: m.ports.iter().map(|p| format!("{} {} {} {}", p.direction, p.name, width(p.width()), p.kind)).collect(),
        signals: m.internal_signals.iter().map(|s| format!("{} {} {}", s.kind, s.name, width(s.width()))).collect(),
        instances: m
            .instances
            .iter()
            .map(|i| {
                let mut s = format!("{} {}", i.name, i.module_name);
                for (f, a) in &i.connections {
                    s.push_str(&format!(" {f}={}", join(a)));
                }
                s
            })
            .collect(),
        assignments: m
            .assignments
            .iter()
            .map(|a| {
                let rhs = join(&a.rhs_signals);
                if a.continuous {
                    format!("assign {} = {rhs}", a.lhs)
                } else if a.blocking {
                    format!("{} = {rhs}", a.lhs)
                } else {
                    format!("{} <= {rhs}", a.lhs)
                }
            })
            .collect(),
        control: m
            .control_flows
            .iter()
            .map(|c| format!("{} {} -> {}", c.kind, join(&c.condition_signals), join(&c.governed_lhs)))
            .collect(),
        fsms: m
            .fsms
            .iter()
            .map(|f| {
                let clk = if f.clock_signal.is_empty() { "-" } else { f.clock_signal.as_str() };
                let det = serde_json::to_value(f.detection).unwrap();
                format!("{} {clk} {}", f.state_signal, det.as_str().unwrap())
            })
            .collect(),
        warnings,
    }
}

/// Compares every corpus module against its golden; returns one line per
/// mismatch.
pub fn check_rtl_corpus() -> Vec<String> {
    let dir = fixtures().join("rtl_corpus");
    let mut goldens: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    goldens.sort();
    let mut problems = Vec::new();
    for g in &goldens {
        let want: Golden = toml::from_str(&std::fs::read_to_string(g).unwrap()).unwrap();
        let src_path = g.with_extension("v");
        let src = std::fs::read_to_string(&src_path).unwrap();
        let name = src_path.file_name().unwrap().to_string_lossy().into_owned();
        let (design, warnings) = match parse_sources(&[(&name, &src)], None) {
            Ok(x) => x,
            Err(e) => {
                problems.push(format!("{name}: parse failed: {e}"));
                continue;
            }
        };
        let Some(m) = design.module(&want.module) else {
            problems.push(format!("{name}: module {} missing", want.module));
            continue;
        };
        let got = summarize(m, warnings.len());
        let mut cmp = |field: &str, a: &dyn std::fmt::Debug, b: &dyn std::fmt::Debug| {
            let (a, b) = (format!("{a:?}"), format!("{b:?}"));
            if a != b {
                problems.push(format!("{name}: {field}: expected {a}, got {b}"));
            }
        };
        cmp("ports", &want.ports, &got.ports);
        cmp("signals", &want.signals, &got.signals);
        cmp("instances", &want.instances, &got.instances);
        cmp("assignments", &want.assignments, &got.assignments);
        cmp("control", &want.control, &got.control);
        cmp("fsms", &want.fsms, &got.fsms);
        cmp("warnings", &want.warnings, &got.warnings);
    }
    if goldens.len() < 10 {
        problems.push(format!("only {} corpus modules", goldens.len()));
    }
    problems
}

/// Published reference assertions, as (label, text).
pub fn printed_svas() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixtures().join("sva/printed.sva")).unwrap();
    let mut out: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if let Some(label) = line.strip_prefix("# ") {
            out.push((label.to_string(), String::new()));
        } else if !line.trim().is_empty() {
            let body = &mut out.last_mut().expect("label before body").1;
            body.push_str(line);
            body.push('\n');
        }
    }
    out
}

#[derive(Debug, Deserialize)]
pub struct MalformedCase {
    pub text: String,
    pub line: usize,
    pub col: usize,
}

pub fn malformed_svas() -> Vec<MalformedCase> {
    #[derive(Deserialize)]
    struct File {
        case: Vec<MalformedCase>,
    }
    let text = std::fs::read_to_string(fixtures().join("sva/malformed.toml")).unwrap();
    toml::from_str::<File>(&text).unwrap().case
}

/// Parses the printed corpus and the malformed cases; one line per problem.
pub fn check_sva_corpus() -> Vec<String> {
    use kgsva::sva::parse_sva;
    let mut problems = Vec::new();
    let printed = printed_svas();
    for (label, text) in &printed {
        if let Err(d) = parse_sva(text) {
            problems.push(format!("{label}: {d}"));
        }
    }
    let counter = parse_sva(&printed[0].1).map(|a| a.referenced_signals).unwrap_or_default();
    let want: BTreeSet<String> = ["MTxClk", "ResetByteCnt", "TxReset", "ByteCnt", "TxFlow"].map(String::from).into();
    if counter != want {
        problems.push(format!("byte counter signals: {counter:?}"));
    }
    let bad = malformed_svas();
    if bad.len() < 10 {
        problems.push(format!("only {} malformed cases", bad.len()));
    }
    for c in &bad {
        match parse_sva(&c.text) {
            Ok(a) => problems.push(format!("accepted {:?} as {a}", c.text)),
            Err(d) if (d.line, d.col) != (c.line, c.col) || d.message.is_empty() => {
                problems.push(format!("{:?}: expected {}:{}, got {d}", c.text, c.line, c.col))
            }
            Err(_) => {}
        }
    }
    problems
}

pub const NODE_TYPES: [&str; 6] = ["port", "signal", "module", "register", "Signal", "Section"];
const RELATIONS: [&str; 5] = ["drives", "contains", "uses_in_rhs", "describes", "connects_port"];

/// Random multigraph with 1..=`max_nodes` nodes; may contain self-loops,
/// parallel edges and several components.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize) -> Graph {
    let n = rng.random_range(1..=max_nodes);
    let mut g = Graph::new();
    for i in 0..n {
        let ty = NODE_TYPES[rng.random_range(0..NODE_TYPES.len())];
        let mut node = KgNode::new(format!("n{i:03}"), format!("sig_{i}"), ty);
        if rng.random_bool(0.5) {
            node = node.with_description(format!("node {i} ü \"quoted\"\nline"));
        }
        if rng.random_bool(0.3) {
            node = node.with_module(format!("m{}", i % 3)).with_attr("width", rng.random_range(1..64).to_string());
        }
        if rng.random_bool(0.2) {
            node = node.with_source(format!("chunk-{}", rng.random_range(0..9)));
        }
        g.add_node(node).unwrap();
    }
    let m = rng.random_range(0..=2 * n);
    for _ in 0..m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let rel = RELATIONS[rng.random_range(0..RELATIONS.len())];
        let w: f64 = rng.random::<f64>() * 10.0;
        g.add_edge(KgEdge::new(format!("n{a:03}"), format!("n{b:03}"), rel).with_weight(w).with_description(format!("{a}->{b}")))
            .unwrap();
    }
    g
}

/// Bundled uart fixture config writing into `run_dir`.
pub fn uart_config(run_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&fixtures().join("uart/config.toml")).unwrap();
    cfg.run_dir = run_dir.to_path_buf();
    cfg
}

/// Every file under `dir` (relative path → bytes), skipping `skip` names.
pub fn tree(dir: &Path, skip: &[&str]) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, d: &Path, skip: &[&str], out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            if skip.contains(&name.as_str()) {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, skip, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, skip, &mut out);
    out
}
