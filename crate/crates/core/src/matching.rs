//! Fuzzy matching of specification signal mentions to RTL names.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{Graph, NodeId};

/// Minimum score for a link to be emitted.
pub const MIN_MATCH_SCORE: f64 = 0.6;

/// Spec node types that name signals.
pub const SIGNAL_LIKE_TYPES: &[&str] = &["Signal", "Port", "Register", "Clock", "Pin"];

/// RTL node kinds that can be matched.
pub const RTL_SIGNAL_KINDS: &[&str] = &["port", "signal", "register"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Exact,
    Abbreviation,
    Normalization,
    ActiveLow,
    EditDistance,
}

impl fmt::Display for MatchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMethod::Exact => "exact",
            MatchMethod::Abbreviation => "abbreviation",
            MatchMethod::Normalization => "normalization",
            MatchMethod::ActiveLow => "active_low",
            MatchMethod::EditDistance => "edit_distance",
        })
    }
}

#[derive(Debug, Error)]
pub enum AbbrevError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid abbreviation file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("abbreviation {abbrev} maps to both {first} and {second}")]
    Ambiguous {
        abbrev: String,
        first: String,
        second: String,
    },
}

#[derive(Deserialize)]
struct AbbrevFile {
    abbreviations: BTreeMap<String, Vec<String>>,
}

/// Full term ↔ abbreviation pairs, looked up in either direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbbrevDict {
    pairs: BTreeMap<String, Vec<String>>,
    /// abbreviation → full term
    inverse: BTreeMap<String, String>,
}

impl Default for AbbrevDict {
    fn default() -> Self {
        Self::shipped()
    }
}

impl AbbrevDict {
    pub fn new(pairs: BTreeMap<String, Vec<String>>) -> Result<Self, AbbrevError> {
        let mut inverse: BTreeMap<String, String> = BTreeMap::new();
        let pairs: BTreeMap<String, Vec<String>> = pairs
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v.into_iter().map(|a| a.to_lowercase()).collect()))
            .collect();
        for (full, abbrevs) in &pairs {
            for a in abbrevs {
                if let Some(prev) = inverse.insert(a.clone(), full.clone()) {
                    if prev != *full {
                        return Err(AbbrevError::Ambiguous {
                            abbrev: a.clone(),
                            first: prev,
                            second: full.clone(),
                        });
                    }
                }
            }
        }
        Ok(AbbrevDict { pairs, inverse })
    }

    pub fn shipped() -> Self {
        Self::from_toml(include_str!("../assets/abbreviations.toml")).expect("shipped dictionary parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, AbbrevError> {
        let f: AbbrevFile = toml::from_str(text)?;
        Self::new(f.abbreviations)
    }

    pub fn load(path: &Path) -> Result<Self, AbbrevError> {
        let text = std::fs::read_to_string(path).map_err(|source| AbbrevError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn pairs(&self) -> &BTreeMap<String, Vec<String>> {
        &self.pairs
    }

    /// Full form of a lowercase word (the word itself when unknown).
    pub fn expand<'a>(&'a self, word: &'a str) -> &'a str {
        self.inverse.get(word).map(String::as_str).unwrap_or(word)
    }

    pub fn abbreviations_of(&self, full: &str) -> &[String] {
        self.pairs.get(full).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Lowercase with `_`, `-` and whitespace removed.
pub fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| !(c.is_whitespace() || *c == '_' || *c == '-'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Lowercase words split on separators and camelCase boundaries.
fn words(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if c.is_whitespace() || c == '_' || c == '-' {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn expanded(name: &str, dict: &AbbrevDict) -> String {
    words(name).iter().map(|w| dict.expand(w)).collect()
}

/// `name` with one active-low marker removed, lowercase.
fn strip_active_low(name: &str) -> Option<String> {
    let l = name.to_lowercase();
    if let Some(s) = l.strip_suffix("_n").or_else(|| l.strip_suffix("_b")) {
        return Some(s.to_string());
    }
    if let Some(s) = l.strip_prefix("not_") {
        return Some(s.to_string());
    }
    l.strip_prefix('n').filter(|s| !s.is_empty()).map(str::to_string)
}

fn active_low_pair(a: &str, b: &str) -> bool {
    let one_way = |x: &str, y: &str| {
        strip_active_low(x).is_some_and(|s| {
            let s = normalize(&s);
            !s.is_empty() && s == normalize(y)
        })
    };
    one_way(a, b) || one_way(b, a)
}

/// Score of the first applicable rule: exact 1.0, abbreviation 0.9,
/// normalization 0.8, active-low 0.8, else edit distance
/// `0.8 - 0.1*d` with `d <= ceil(len/4)` (0 otherwise).
pub fn match_score(spec_name: &str, rtl_name: &str, dict: &AbbrevDict) -> (f64, MatchMethod) {
    if spec_name == rtl_name {
        return (1.0, MatchMethod::Exact);
    }
    let (na, nb) = (normalize(spec_name), normalize(rtl_name));
    if na != nb && expanded(spec_name, dict) == expanded(rtl_name, dict) {
        return (0.9, MatchMethod::Abbreviation);
    }
    if na == nb {
        return (0.8, MatchMethod::Normalization);
    }
    if active_low_pair(spec_name, rtl_name) {
        return (0.8, MatchMethod::ActiveLow);
    }
    let d = strsim::levenshtein(&na, &nb);
    let len = na.chars().count().max(nb.chars().count());
    let cap = len.div_ceil(4);
    let score = if d <= cap && d < 8 { (8 - d) as f64 / 10.0 } else { 0.0 };
    (score, MatchMethod::EditDistance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub spec_node: NodeId,
    pub spec_name: String,
    pub rtl_node: NodeId,
    pub rtl_name: String,
    pub score: f64,
    pub method: MatchMethod,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matches: Vec<MatchResult>,
    /// Runner-up and sub-threshold candidates with a positive score.
    pub dropped: Vec<MatchResult>,
    /// Spec nodes with no candidate at or above the threshold.
    pub unmatched: Vec<NodeId>,
}

impl MatchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Kept per spec node in the dropped list.
const DROPPED_PER_NODE: usize = 5;

/// Best RTL signal for every signal-like spec node. Ties on score go to
/// the lexicographically smallest RTL name, then node id.
pub fn link_spec_to_rtl(g: &Graph, dict: &AbbrevDict) -> MatchReport {
    let signal_types: BTreeSet<String> = SIGNAL_LIKE_TYPES.iter().map(|t| t.to_lowercase()).collect();
    let spec: Vec<_> = g
        .nodes()
        .filter(|n| !n.is_rtl() && signal_types.contains(&n.node_type.as_str().to_lowercase()))
        .collect();
    let rtl: Vec<_> = g
        .nodes()
        .filter(|n| n.is_rtl() && RTL_SIGNAL_KINDS.contains(&n.node_type.as_str()))
        .collect();
    let per_node: Vec<(NodeId, Vec<MatchResult>)> = spec
        .par_iter()
        .map(|s| {
            let mut cands: Vec<MatchResult> = rtl
                .iter()
                .filter_map(|r| {
                    let (score, method) = match_score(&s.name, &r.name, dict);
                    (score > 0.0).then(|| MatchResult {
                        spec_node: s.id.clone(),
                        spec_name: s.name.clone(),
                        rtl_node: r.id.clone(),
                        rtl_name: r.name.clone(),
                        score,
                        method,
                    })
                })
                .collect();
            cands.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then_with(|| a.rtl_name.cmp(&b.rtl_name))
                    .then_with(|| a.rtl_node.cmp(&b.rtl_node))
            });
            (s.id.clone(), cands)
        })
        .collect();
    let mut report = MatchReport::default();
    for (id, cands) in per_node {
        let mut it = cands.into_iter();
        match it.next() {
            Some(best) if best.score >= MIN_MATCH_SCORE => report.matches.push(best),
            Some(best) => {
                log::warn!("no RTL match for spec node {id} (best {} at {:.2})", best.rtl_name, best.score);
                report.unmatched.push(id);
                report.dropped.push(best);
            }
            None => {
                log::warn!("no RTL match for spec node {id}");
                report.unmatched.push(id);
            }
        }
        report.dropped.extend(it.take(DROPPED_PER_NODE));
    }
    report
}
