//! Structural and behavioral facts from a Verilog subset.
//!
//! Supported: module/endmodule with ANSI or non-ANSI ports, parameter and
//! localparam integer constants, wire/reg declarations with constant
//! ranges, continuous assigns, always blocks with edge or `*` sensitivity,
//! begin/end, if/else, case/casez/casex, for/while/repeat loops and module
//! instantiation with named or positional connections. Generate blocks,
//! functions, tasks, gate primitives and assertions are skipped with a
//! warning. Escaped identifiers are not supported.

mod dataflow;
pub(crate) mod expr;
mod fsm;
mod lexer;
mod parser;
mod preprocess;
mod signals;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataflow::{dataflow_edges, DataflowEdge, FlowKind, SignalRef};
pub use expr::Expr;
pub use fsm::detect_fsms;
pub use lexer::{lex, Token, TokenKind};
pub use parser::parse_rtl;
pub use preprocess::{preprocess_file, preprocess_includes, LineMap, Preprocessed};
pub use signals::{extract_valid_signals, infer_top};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Wire,
    Reg,
    Unspecified,
}

impl fmt::Display for NetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetKind::Wire => "wire",
            NetKind::Reg => "reg",
            NetKind::Unspecified => "unspecified",
        })
    }
}

fn range_width(msb: Option<i64>, lsb: Option<i64>) -> Option<u64> {
    match (msb, lsb) {
        (Some(m), Some(l)) => Some(m.abs_diff(l) + 1),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub msb: Option<i64>,
    pub lsb: Option<i64>,
    pub kind: NetKind,
    /// A range was written but could not be reduced to constants.
    #[serde(default)]
    pub width_unknown: bool,
}

impl PortDecl {
    /// Bit width; `Some(1)` for scalar ports, `None` when unresolved.
    pub fn width(&self) -> Option<u64> {
        if self.width_unknown {
            return None;
        }
        range_width(self.msb, self.lsb).or(Some(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalDecl {
    pub name: String,
    pub kind: NetKind,
    pub msb: Option<i64>,
    pub lsb: Option<i64>,
    #[serde(default)]
    pub width_unknown: bool,
    /// Created by the implicit-net rule rather than declared.
    #[serde(default)]
    pub implicit: bool,
}

impl SignalDecl {
    pub fn width(&self) -> Option<u64> {
        if self.width_unknown {
            return None;
        }
        range_width(self.msb, self.lsb).or(Some(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFact {
    pub name: String,
    pub module_name: String,
    /// Formal port → actual signal names appearing in the connection.
    pub connections: BTreeMap<String, BTreeSet<String>>,
    /// Positional connections before formal names are known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positional: Vec<BTreeSet<String>>,
    pub source_span: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentFact {
    pub lhs: String,
    pub rhs_signals: BTreeSet<String>,
    /// Procedural `=`. Always false for continuous assignments.
    pub blocking: bool,
    pub continuous: bool,
    pub in_module: String,
    pub source_span: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsmDetection {
    ClockedCase,
    NamePattern,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmFact {
    pub state_signal: String,
    pub clock_signal: String,
    pub in_module: String,
    pub detection: FsmDetection,
    /// Span of the clocked always block, when one was found.
    #[serde(default)]
    pub source_span: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    IfElse,
    Case,
    Loop,
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlKind::IfElse => "if_else",
            ControlKind::Case => "case",
            ControlKind::Loop => "loop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlowFact {
    pub kind: ControlKind,
    pub condition_signals: BTreeSet<String>,
    pub governed_lhs: BTreeSet<String>,
    pub in_module: String,
    pub source_span: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFact {
    /// `posedge`, `negedge`, or empty for level-sensitive events.
    pub edge: String,
    pub signal: String,
}

/// Summary of one always block, kept for FSM detection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlwaysFact {
    pub events: Vec<EventFact>,
    pub star: bool,
    /// Identifier subjects of case statements in the block body.
    pub case_subjects: Vec<String>,
    pub assigned: BTreeSet<String>,
    pub source_span: String,
}

impl AlwaysFact {
    pub fn is_clocked(&self) -> bool {
        self.events.iter().any(|e| !e.edge.is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleFact {
    pub name: String,
    pub file: String,
    pub source_span: String,
    pub parameters: BTreeMap<String, Option<i64>>,
    pub ports: Vec<PortDecl>,
    pub internal_signals: Vec<SignalDecl>,
    pub instances: Vec<InstanceFact>,
    pub assignments: Vec<AssignmentFact>,
    pub control_flows: Vec<ControlFlowFact>,
    pub fsms: Vec<FsmFact>,
    pub always_blocks: Vec<AlwaysFact>,
}

impl ModuleFact {
    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn signal(&self, name: &str) -> Option<&SignalDecl> {
        self.internal_signals.iter().find(|s| s.name == name)
    }

    pub fn declares(&self, name: &str) -> bool {
        self.port(name).is_some() || self.signal(name).is_some()
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceFact> {
        self.instances.iter().find(|i| i.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RtlDesign {
    pub modules: BTreeMap<String, ModuleFact>,
    pub top: Option<String>,
    pub files: Vec<String>,
    /// Instantiated module names with no definition in the parsed files.
    pub external_modules: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtlError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{including}: included file {target} not found")]
    MissingInclude { including: String, target: String },
    #[error("include cycle: {}", .0.join(" -> "))]
    IncludeCycle(Vec<String>),
    #[error("{file}:{line}:{column}: parse error at '{token}': {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        token: String,
        message: String,
    },
    #[error("duplicate module {name} ({first} and {second})")]
    DuplicateModule {
        name: String,
        first: String,
        second: String,
    },
    #[error("unknown top module {0}")]
    UnknownTop(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutput {
    pub modules: Vec<ModuleFact>,
    pub warnings: Vec<Diagnostic>,
}

impl RtlDesign {
    /// Links parsed modules: resolves positional connections, records
    /// external modules and picks the top (explicit, else inferred).
    pub fn link(
        modules: Vec<ModuleFact>,
        files: Vec<String>,
        top: Option<&str>,
    ) -> Result<RtlDesign, RtlError> {
        let mut map: BTreeMap<String, ModuleFact> = BTreeMap::new();
        for m in modules {
            if let Some(prev) = map.get(&m.name) {
                return Err(RtlError::DuplicateModule {
                    name: m.name.clone(),
                    first: prev.source_span.clone(),
                    second: m.source_span.clone(),
                });
            }
            map.insert(m.name.clone(), m);
        }
        let port_orders: BTreeMap<String, Vec<String>> = map
            .iter()
            .map(|(k, m)| (k.clone(), m.ports.iter().map(|p| p.name.clone()).collect()))
            .collect();
        let mut external = BTreeSet::new();
        for m in map.values_mut() {
            for inst in &mut m.instances {
                match port_orders.get(&inst.module_name) {
                    Some(order) => {
                        for (i, actual) in std::mem::take(&mut inst.positional).into_iter().enumerate() {
                            if let Some(formal) = order.get(i) {
                                inst.connections.insert(formal.clone(), actual);
                            }
                        }
                    }
                    None => {
                        external.insert(inst.module_name.clone());
                    }
                }
            }
        }
        let mut design = RtlDesign {
            modules: map,
            top: None,
            files,
            external_modules: external,
        };
        design.top = match top {
            Some(t) if design.modules.contains_key(t) => Some(t.to_string()),
            Some(t) => return Err(RtlError::UnknownTop(t.to_string())),
            None => infer_top(&design),
        };
        Ok(design)
    }

    pub fn module(&self, name: &str) -> Option<&ModuleFact> {
        self.modules.get(name)
    }

    pub fn top_module(&self) -> Option<&ModuleFact> {
        self.top.as_deref().and_then(|t| self.modules.get(t))
    }

    /// All module and instance names, used to recognise hierarchical
    /// references.
    pub fn scope_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.modules.values() {
            out.insert(m.name.clone());
            out.extend(m.instances.iter().map(|i| i.name.clone()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("design serializes");
        s.push('\n');
        s
    }
}

/// (display name, parse output, preprocessor warnings)
type FileParse = (String, ParseOutput, Vec<Diagnostic>);

/// Preprocesses and parses `files` (in parallel), then links the design.
pub fn parse_design(
    files: &[PathBuf],
    include_dirs: &[PathBuf],
    top: Option<&str>,
) -> Result<(RtlDesign, Vec<Diagnostic>), RtlError> {
    let outputs: Vec<Result<FileParse, RtlError>> = files
        .par_iter()
        .map(|f| {
            let pre = preprocess_file(f, include_dirs)?;
            let out = parser::parse_preprocessed(&pre, &display(f))?;
            Ok((display(f), out, pre.warnings.clone()))
        })
        .collect();
    let mut modules = Vec::new();
    let mut warnings = Vec::new();
    let mut names = Vec::new();
    for o in outputs {
        let (name, out, pre_warn) = o?;
        names.push(name);
        warnings.extend(pre_warn);
        warnings.extend(out.warnings);
        modules.extend(out.modules);
    }
    let design = RtlDesign::link(modules, names, top)?;
    Ok((design, warnings))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Parses in-memory sources (name, text) without include handling.
pub fn parse_sources(
    sources: &[(&str, &str)],
    top: Option<&str>,
) -> Result<(RtlDesign, Vec<Diagnostic>), RtlError> {
    let mut modules = Vec::new();
    let mut warnings = Vec::new();
    for (name, text) in sources {
        let out = parse_rtl(text, name)?;
        warnings.extend(out.warnings);
        modules.extend(out.modules);
    }
    let files = sources.iter().map(|(n, _)| n.to_string()).collect();
    Ok((RtlDesign::link(modules, files, top)?, warnings))
}
