use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::context::{ContextItem, ContextType};
use crate::llm::{LlmProvider, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::template::Template;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrunerConfig {
    pub max_per_type: usize,
    pub max_total: usize,
    pub min_per_type: usize,
    /// Characters of each candidate shown to the pruner.
    pub display_chars: usize,
}

impl Default for PrunerConfig {
    fn default() -> Self {
        PrunerConfig {
            max_per_type: 50,
            max_total: 100,
            min_per_type: 2,
            display_chars: 2000,
        }
    }
}

impl PrunerConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.min_per_type > self.max_per_type || self.max_per_type > self.max_total {
            return Err(SynthesisError::PrunerConfig(format!(
                "need min_per_type <= max_per_type <= max_total, got {} / {} / {}",
                self.min_per_type, self.max_per_type, self.max_total
            )));
        }
        Ok(())
    }
}

/// Indices listed after the first `Selected contexts:` marker, in reply
/// order without repeats. `None` when the marker or list is missing.
pub fn parse_selection(reply: &str) -> Option<Vec<usize>> {
    let at = reply.find("Selected contexts:")?;
    let rest = &reply[at + "Selected contexts:".len()..];
    let open = rest.find('[')?;
    if !rest[..open].trim().is_empty() {
        return None;
    }
    let close = rest[open..].find(']')? + open;
    let mut out = Vec::new();
    for part in rest[open + 1..close].split(',') {
        let p = part.trim();
        if p.is_empty() {
            continue;
        }
        let i: usize = p.parse().ok()?;
        if !out.contains(&i) {
            out.push(i);
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    /// ctx_type → indices chosen by the pruner reply (before fallback).
    pub selected: BTreeMap<String, Vec<usize>>,
    pub unparseable: Vec<String>,
    pub out_of_range: usize,
    pub duplicates_removed: usize,
    pub filled_by_score: usize,
    pub trimmed_global: usize,
}

fn by_score_desc(items: &[ContextItem], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| items[b].score.total_cmp(&items[a].score).then(a.cmp(&b)));
}

fn render_candidates(items: &[ContextItem], display_chars: usize) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let text: String = c.text.chars().take(display_chars).collect();
            let more = if c.text.chars().count() > display_chars { " [...]" } else { "" };
            format!("Context {i} (score {:.3}):\n{text}{more}", c.score)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Keeps a bounded, relevant subset of the `rag` and `kg_path`
/// candidates, one pruner call per type. Other types pass through.
pub fn prune(
    llm: &dyn LlmProvider,
    template: &Template,
    signal: &str,
    query: &str,
    candidates: &[ContextItem],
    cfg: &PrunerConfig,
) -> Result<(Vec<ContextItem>, PruneReport), SynthesisError> {
    cfg.validate()?;
    let mut report = PruneReport::default();
    let mut out: Vec<ContextItem> = candidates
        .iter()
        .filter(|c| !matches!(c.ctx_type, ContextType::Rag | ContextType::KgPath))
        .cloned()
        .collect();
    let mut pruned: Vec<ContextItem> = Vec::new();
    for ty in [ContextType::Rag, ContextType::KgPath] {
        // identical texts collapse to the best-scoring copy
        let mut group: Vec<ContextItem> = Vec::new();
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for c in candidates.iter().filter(|c| c.ctx_type == ty) {
            match seen.get(c.text.as_str()) {
                Some(&j) => {
                    report.duplicates_removed += 1;
                    if c.score > group[j].score {
                        group[j] = c.clone();
                    }
                }
                None => {
                    seen.insert(&c.text, group.len());
                    group.push(c.clone());
                }
            }
        }
        if group.is_empty() {
            continue;
        }
        let prompt = template.fill(&[
            ("signal_name", signal),
            ("query", query),
            ("min_selection", &cfg.min_per_type.to_string()),
            ("max_selection", &cfg.max_per_type.to_string()),
            ("context_type", ty.as_str()),
            ("contexts", &render_candidates(&group, cfg.display_chars)),
        ])?;
        let reply = llm.complete(&prompt, DEFAULT_MAX_OUTPUT_TOKENS);
        let parsed = match &reply {
            Ok(r) => parse_selection(r),
            Err(e) => {
                log::warn!("pruner call for {ty} of '{signal}' failed: {e}");
                None
            }
        };
        let mut chosen: Vec<usize> = match parsed {
            Some(idx) => {
                report.selected.insert(ty.to_string(), idx.clone());
                let n = idx.len();
                let kept: Vec<usize> = idx.into_iter().filter(|&i| i < group.len()).collect();
                report.out_of_range += n - kept.len();
                kept
            }
            None => {
                report.unparseable.push(ty.to_string());
                Vec::new()
            }
        };
        chosen.truncate(cfg.max_per_type);
        let floor = cfg.min_per_type.min(group.len());
        if chosen.len() < floor {
            let taken: BTreeSet<usize> = chosen.iter().copied().collect();
            let mut rest: Vec<usize> = (0..group.len()).filter(|i| !taken.contains(i)).collect();
            by_score_desc(&group, &mut rest);
            let need = floor - chosen.len();
            report.filled_by_score += need;
            chosen.extend(rest.into_iter().take(need));
        }
        chosen.sort_unstable();
        pruned.extend(chosen.into_iter().map(|i| group[i].clone()));
    }
    if pruned.len() > cfg.max_total {
        let mut idx: Vec<usize> = (0..pruned.len()).collect();
        by_score_desc(&pruned, &mut idx);
        let keep: BTreeSet<usize> = idx.into_iter().take(cfg.max_total).collect();
        report.trimmed_global = pruned.len() - keep.len();
        pruned = pruned.into_iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, c)| c).collect();
    }
    out.extend(pruned);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockProvider, MockRule, MockScript};
    use crate::template::PromptSet;

    fn cands(ty: ContextType, n: usize) -> Vec<ContextItem> {
        (0..n)
            .map(|i| ContextItem::new(ty, "tx_busy", format!("{ty} text {i}")).with_score(i as f64 / 10.0))
            .collect()
    }

    fn replying(reply: &str) -> MockProvider {
        MockProvider::new(MockScript::new(vec![MockRule::contains(&["CONTEXTS TO EVALUATE"], reply)]))
    }

    #[test]
    fn parses_literal_selection() {
        assert_eq!(parse_selection("Selected contexts: [0, 2, 5]"), Some(vec![0, 2, 5]));
        assert_eq!(parse_selection("blah\nSelected contexts: []"), Some(vec![]));
        assert_eq!(parse_selection("none relevant"), None);
        assert_eq!(parse_selection("Selected contexts: [a, 1]"), None);
    }

    #[test]
    fn selection_is_honoured() {
        let p = PromptSet::default();
        let (out, r) = prune(&replying("Selected contexts: [0, 2, 5]"), &p.pruner, "tx_busy", "tx_busy", &cands(ContextType::Rag, 6), &PrunerConfig::default()).unwrap();
        let texts: Vec<_> = out.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["rag text 0", "rag text 2", "rag text 5"]);
        assert_eq!(r.filled_by_score, 0);
    }

    #[test]
    fn unparseable_falls_back_to_top_scores() {
        let p = PromptSet::default();
        let (out, r) = prune(&replying("none relevant"), &p.pruner, "s", "s", &cands(ContextType::KgPath, 5), &PrunerConfig::default()).unwrap();
        let texts: Vec<_> = out.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["kg_path text 3", "kg_path text 4"]);
        assert_eq!(r.unparseable, ["kg_path"]);
    }

    #[test]
    fn global_cap_trims_lowest() {
        let p = PromptSet::default();
        let all: String = (0..60).map(|i| i.to_string()).collect::<Vec<_>>().join(", ");
        let llm = replying(&format!("Selected contexts: [{all}]"));
        let mut c = cands(ContextType::Rag, 60);
        c.extend(cands(ContextType::KgPath, 60));
        let (out, r) = prune(&llm, &p.pruner, "s", "s", &c, &PrunerConfig::default()).unwrap();
        assert_eq!(out.len(), 100);
        assert_eq!(r.trimmed_global, 0);
        let rag = out.iter().filter(|c| c.ctx_type == ContextType::Rag).count();
        assert_eq!(rag, 50);
        let cfg = PrunerConfig {
            max_total: 80,
            ..Default::default()
        };
        let (out, r) = prune(&llm, &p.pruner, "s", "s", &c, &cfg).unwrap();
        assert_eq!(out.len(), 80);
        assert_eq!(r.trimmed_global, 20);
        let min_kept = out.iter().map(|c| c.score).fold(f64::INFINITY, f64::min);
        assert!(min_kept >= 0.1);
    }

    #[test]
    fn summaries_bypass_and_duplicates_collapse() {
        let p = PromptSet::default();
        let mut c = vec![ContextItem::new(ContextType::SummaryDesign, "", "design")];
        c.push(ContextItem::new(ContextType::Rag, "s", "same").with_score(0.1));
        c.push(ContextItem::new(ContextType::Rag, "s", "same").with_score(0.9));
        let (out, r) = prune(&replying("Selected contexts: [0]"), &p.pruner, "s", "s", &c, &PrunerConfig::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].score, 0.9);
        assert_eq!(r.duplicates_removed, 1);
    }
}
