//! Syntactic checking of generated assertions against a small property
//! grammar: one clocking event, optional `disable iff`, and a boolean or
//! delayed sequence on each side of an optional implication.

mod check;
mod parser;
mod report;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use check::{check, check_text, CheckVerdict};
pub use parser::parse_sva;
pub use report::{annotate, batch_report, BatchReport, RecordVerdict, SignalCounts};

use crate::rtl::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Posedge,
    Negedge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockEvent {
    /// `None` for a bare signal in an `or` list.
    pub edge: Option<Edge>,
    pub signal: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImplOp {
    /// `|->`
    Overlap,
    /// `|=>`
    NonOverlap,
    None,
}

/// One element of a sequence; `delay` is the `##N` before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqStep {
    pub delay: Option<u32>,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence(pub Vec<SeqStep>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvaAst {
    pub name: Option<String>,
    pub clocking: Vec<ClockEvent>,
    pub disable_iff: Option<Expr>,
    pub antecedent: Sequence,
    pub operator: ImplOp,
    pub consequent: Option<Sequence>,
    pub referenced_signals: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

impl Sequence {
    fn collect(&self, out: &mut BTreeSet<String>) {
        for s in &self.0 {
            out.extend(s.expr.identifiers());
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if let Some(d) = s.delay {
                write!(f, "##{d} ")?;
            }
            write!(f, "{}", s.expr)?;
        }
        Ok(())
    }
}

impl SvaAst {
    pub(crate) fn derive_signals(&mut self) {
        let mut out = BTreeSet::new();
        for e in &self.clocking {
            out.extend(e.signal.identifiers());
        }
        if let Some(d) = &self.disable_iff {
            out.extend(d.identifiers());
        }
        self.antecedent.collect(&mut out);
        if let Some(c) = &self.consequent {
            c.collect(&mut out);
        }
        self.referenced_signals = out;
    }
}

/// Canonical single-line form; parsing it yields an equal tree.
impl fmt::Display for SvaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "property {n}; ")?;
        }
        f.write_str("@(")?;
        for (i, e) in self.clocking.iter().enumerate() {
            if i > 0 {
                f.write_str(" or ")?;
            }
            match e.edge {
                Some(Edge::Posedge) => f.write_str("posedge ")?,
                Some(Edge::Negedge) => f.write_str("negedge ")?,
                None => {}
            }
            write!(f, "{}", e.signal)?;
        }
        f.write_str(") ")?;
        if let Some(d) = &self.disable_iff {
            write!(f, "disable iff ({d}) ")?;
        }
        write!(f, "{}", self.antecedent)?;
        match (self.operator, &self.consequent) {
            (ImplOp::Overlap, Some(c)) => write!(f, " |-> {c}")?,
            (ImplOp::NonOverlap, Some(c)) => write!(f, " |=> {c}")?,
            _ => {}
        }
        f.write_str(";")?;
        if self.name.is_some() {
            f.write_str(" endproperty")?;
        }
        Ok(())
    }
}
