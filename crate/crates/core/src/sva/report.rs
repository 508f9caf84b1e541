use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{check_text, CheckVerdict};
use crate::synthesis::SvaRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordVerdict {
    pub signal: String,
    pub prompt_ordinal: usize,
    pub plan: String,
    pub sva_text: String,
    /// `None` for records whose assertion never arrived.
    pub verdict: Option<CheckVerdict>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalCounts {
    pub total: usize,
    pub syntactically_correct: usize,
    /// Syntactically correct assertions reading at least one unknown name.
    pub with_unknown_signals: usize,
    pub missing: usize,
}

impl SignalCounts {
    fn add(&mut self, v: Option<&CheckVerdict>) {
        match v {
            None => self.missing += 1,
            Some(v) => {
                self.total += 1;
                if v.syntax_ok {
                    self.syntactically_correct += 1;
                    if !v.unknown_signals.is_empty() {
                        self.with_unknown_signals += 1;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchReport {
    pub totals: SignalCounts,
    pub per_signal: BTreeMap<String, SignalCounts>,
    pub records: Vec<RecordVerdict>,
}

fn verdict_of(r: &SvaRecord, valid: &BTreeSet<String>, scopes: &BTreeSet<String>) -> Option<CheckVerdict> {
    (!r.missing).then(|| check_text(&r.sva_text, valid, scopes))
}

/// Fills `syntax_ok` on every record that carries an assertion.
pub fn annotate(records: &mut [SvaRecord], valid: &BTreeSet<String>, scopes: &BTreeSet<String>) {
    for r in records {
        r.syntax_ok = verdict_of(r, valid, scopes).map(|v| v.syntax_ok);
    }
}

pub fn batch_report(records: &[SvaRecord], valid: &BTreeSet<String>, scopes: &BTreeSet<String>) -> BatchReport {
    let mut rep = BatchReport::default();
    for r in records {
        let v = verdict_of(r, valid, scopes);
        rep.totals.add(v.as_ref());
        rep.per_signal.entry(r.signal.clone()).or_default().add(v.as_ref());
        rep.records.push(RecordVerdict {
            signal: r.signal.clone(),
            prompt_ordinal: r.prompt_ordinal,
            plan: r.plan.clone(),
            sva_text: r.sva_text.clone(),
            verdict: v,
        });
    }
    rep
}

impl BatchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-signal table with a total row.
    pub fn render_table(&self) -> String {
        let width = self.per_signal.keys().map(String::len).max().unwrap_or(0).max("signal".len()).max("TOTAL".len());
        let mut out = String::new();
        let row = |out: &mut String, name: &str, c: &SignalCounts| {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>5}  {:>5}  {:>7}  {:>7}",
                c.total, c.syntactically_correct, c.with_unknown_signals, c.missing
            );
        };
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>5}  {:>7}  {:>7}", "signal", "#SVA", "#SynC", "unknown", "missing");
        let _ = writeln!(out, "{}", "-".repeat(width + 32));
        for (name, c) in &self.per_signal {
            row(&mut out, name, c);
        }
        let _ = writeln!(out, "{}", "-".repeat(width + 32));
        row(&mut out, "TOTAL", &self.totals);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(signal: &str, sva: &str, missing: bool) -> SvaRecord {
        SvaRecord {
            signal: signal.into(),
            plan: "p".into(),
            sva_text: sva.into(),
            prompt_ordinal: 0,
            syntax_ok: None,
            missing,
        }
    }

    #[test]
    fn counts() {
        let valid: BTreeSet<String> = ["clk", "a", "b"].iter().map(|s| s.to_string()).collect();
        let mut rs = vec![
            rec("a", "@(posedge clk) a |-> b", false),
            rec("a", "@(posedge clk) a |-> |-> b", false),
            rec("b", "@(posedge clk) b |=> ghost", false),
            rec("b", "", true),
        ];
        let r = batch_report(&rs, &valid, &BTreeSet::new());
        assert_eq!((r.totals.total, r.totals.syntactically_correct, r.totals.with_unknown_signals, r.totals.missing), (3, 2, 1, 1));
        assert_eq!(r.per_signal["a"].syntactically_correct, 1);
        assert_eq!(r.to_json(), batch_report(&rs, &valid, &BTreeSet::new()).to_json());
        assert!(r.render_table().contains("TOTAL"));
        annotate(&mut rs, &valid, &BTreeSet::new());
        assert_eq!(rs.iter().map(|r| r.syntax_ok).collect::<Vec<_>>(), [Some(true), Some(false), Some(true), None]);
    }

    #[test]
    fn empty() {
        let r = batch_report(&[], &BTreeSet::new(), &BTreeSet::new());
        assert_eq!(r.totals, SignalCounts::default());
    }
}
