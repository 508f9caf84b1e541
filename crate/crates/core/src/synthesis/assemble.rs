use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::context::{ContextItem, ContextType};
use crate::llm::TokenCounter;
use crate::template::Template;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    /// Maximum prompts per signal.
    pub budget: usize,
    pub token_limit: usize,
}

impl AssemblyConfig {
    pub fn new(token_limit: usize) -> Self {
        AssemblyConfig { budget: 3, token_limit }
    }
}

/// The context carried by one prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptParts {
    pub global_summary: String,
    pub signal_desc: String,
    pub rag: Vec<ContextItem>,
    pub kg: Vec<ContextItem>,
}

fn join(items: &[ContextItem]) -> String {
    if items.is_empty() {
        return "(none)".to_string();
    }
    items.iter().map(|c| c.text.trim_end()).collect::<Vec<_>>().join("\n\n")
}

impl PromptParts {
    pub fn rag_text(&self) -> String {
        join(&self.rag)
    }

    pub fn kg_text(&self) -> String {
        join(&self.kg)
    }

    pub fn item_count(&self) -> usize {
        self.rag.len() + self.kg.len()
    }

    /// Removes the lowest-scoring packed item; false when none is left.
    pub fn drop_lowest(&mut self) -> bool {
        let low = |v: &[ContextItem]| v.iter().enumerate().min_by(|a, b| a.1.score.total_cmp(&b.1.score)).map(|(i, c)| (i, c.score));
        match (low(&self.rag), low(&self.kg)) {
            (Some((i, a)), Some((_, b))) if a <= b => {
                self.rag.remove(i);
            }
            (_, Some((j, _))) => {
                self.kg.remove(j);
            }
            (Some((i, _)), None) => {
                self.rag.remove(i);
            }
            (None, None) => return false,
        }
        true
    }
}

pub trait PromptRenderer: Sync {
    fn render(&self, parts: &PromptParts) -> Result<String, SynthesisError>;
}

/// Renders parts through the plan-generation template.
#[derive(Debug, Clone)]
pub struct PlanPromptRenderer<'a> {
    pub template: &'a Template,
    pub signal: &'a str,
    pub valid_signals: String,
    pub examples: &'a str,
}

impl<'a> PlanPromptRenderer<'a> {
    pub fn new(template: &'a Template, signal: &'a str, valid: &BTreeSet<String>, examples: &'a str) -> Self {
        PlanPromptRenderer {
            template,
            signal,
            valid_signals: valid.iter().cloned().collect::<Vec<_>>().join(", "),
            examples,
        }
    }
}

impl PromptRenderer for PlanPromptRenderer<'_> {
    fn render(&self, parts: &PromptParts) -> Result<String, SynthesisError> {
        let summary = if parts.signal_desc.is_empty() {
            parts.global_summary.clone()
        } else {
            format!("{}\n\nSignal description:\n{}", parts.global_summary, parts.signal_desc)
        };
        Ok(self.template.fill(&[
            ("signal_name", self.signal),
            ("global_summary", &summary),
            ("rag_context", &parts.rag_text()),
            ("grw_context", &parts.kg_text()),
            ("valid_signals", &self.valid_signals),
            ("examples", self.examples),
        ])?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub ordinal: usize,
    pub text: String,
    pub token_count: usize,
    pub parts: PromptParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub signal: String,
    pub prompts: Vec<AssembledPrompt>,
    pub budget: usize,
    pub token_limit: usize,
    /// Pruned items that fit in no prompt.
    pub dropped: usize,
}

/// Concatenated global summary texts in context-type order.
pub fn global_summary_text(summaries: &[ContextItem]) -> String {
    let mut s: Vec<&ContextItem> = summaries.iter().filter(|c| c.ctx_type.is_global_summary()).collect();
    s.sort_by_key(|c| c.ctx_type);
    s.iter().map(|c| c.text.trim_end()).collect::<Vec<_>>().join("\n\n")
}

/// Packs pruned `rag`/`kg_path` items into at most `cfg.budget` prompts
/// that share a preamble of the global summaries and the signal
/// description. Items go round-robin in score order to the next prompt
/// with room; items that fit nowhere are dropped.
pub fn assemble_prompts(
    signal: &str,
    summaries: &[ContextItem],
    pruned: &[ContextItem],
    renderer: &dyn PromptRenderer,
    counter: &dyn TokenCounter,
    cfg: AssemblyConfig,
) -> Result<PromptBundle, SynthesisError> {
    let budget = cfg.budget.max(1);
    let preamble = PromptParts {
        global_summary: global_summary_text(summaries),
        signal_desc: summaries
            .iter()
            .chain(pruned)
            .filter(|c| c.ctx_type == ContextType::SignalDesc)
            .map(|c| c.text.trim_end())
            .collect::<Vec<_>>()
            .join("\n\n"),
        ..Default::default()
    };
    let base = counter.count(&renderer.render(&preamble)?);
    if base > cfg.token_limit {
        return Err(SynthesisError::PreambleOverflow {
            needed: base,
            limit: cfg.token_limit,
        });
    }
    let mut items: Vec<&ContextItem> = pruned
        .iter()
        .filter(|c| matches!(c.ctx_type, ContextType::Rag | ContextType::KgPath))
        .collect();
    items.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut parts = vec![preamble; budget];
    let mut dropped = 0;
    let mut cursor = 0;
    for item in items {
        let mut placed = false;
        for k in 0..budget {
            let p = (cursor + k) % budget;
            let mut trial = parts[p].clone();
            match item.ctx_type {
                ContextType::Rag => trial.rag.push(item.clone()),
                _ => trial.kg.push(item.clone()),
            }
            if counter.count(&renderer.render(&trial)?) <= cfg.token_limit {
                parts[p] = trial;
                cursor = (p + 1) % budget;
                placed = true;
                break;
            }
        }
        if !placed {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::info!("{signal}: {dropped} context items did not fit any prompt");
    }

    let mut prompts = Vec::new();
    for (i, p) in parts.into_iter().enumerate() {
        if i > 0 && p.item_count() == 0 {
            continue;
        }
        let text = renderer.render(&p)?;
        prompts.push(AssembledPrompt {
            ordinal: prompts.len(),
            token_count: counter.count(&text),
            text,
            parts: p,
        });
    }
    Ok(PromptBundle {
        signal: signal.to_string(),
        prompts,
        budget,
        token_limit: cfg.token_limit,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::HeuristicCounter;
    use crate::template::PromptSet;

    /// Plain concatenation, so token counts add exactly.
    struct Concat;

    impl PromptRenderer for Concat {
        fn render(&self, p: &PromptParts) -> Result<String, SynthesisError> {
            let mut s = p.global_summary.clone();
            for c in p.rag.iter().chain(&p.kg) {
                s.push_str(&c.text);
            }
            Ok(s)
        }
    }

    fn item(ty: ContextType, tokens: usize, score: f64) -> ContextItem {
        ContextItem::new(ty, "s", "x".repeat(tokens * 4)).with_score(score)
    }

    fn summary(tokens: usize) -> Vec<ContextItem> {
        vec![ContextItem::new(ContextType::SummaryDesign, "", "y".repeat(tokens * 4))]
    }

    #[test]
    fn empty_gives_preamble_only() {
        let b = assemble_prompts("s", &summary(10), &[], &Concat, &HeuristicCounter, AssemblyConfig::new(100)).unwrap();
        assert_eq!(b.prompts.len(), 1);
        assert_eq!(b.prompts[0].token_count, 10);
    }

    #[test]
    fn preamble_overflow() {
        let e = assemble_prompts("s", &summary(200), &[], &Concat, &HeuristicCounter, AssemblyConfig::new(100));
        assert!(matches!(e, Err(SynthesisError::PreambleOverflow { needed: 200, limit: 100 })));
    }

    #[test]
    fn single_prompt_drops_overflow() {
        let items: Vec<_> = (0..8).map(|i| item(ContextType::Rag, 100, i as f64)).collect();
        let cfg = AssemblyConfig { budget: 1, token_limit: 550 };
        let b = assemble_prompts("s", &summary(50), &items, &Concat, &HeuristicCounter, cfg).unwrap();
        assert_eq!(b.prompts.len(), 1);
        assert_eq!(b.prompts[0].parts.rag.len(), 5);
        assert_eq!(b.dropped, 3);
        // highest scores kept
        assert!(b.prompts[0].parts.rag.iter().all(|c| c.score >= 3.0));
    }

    #[test]
    fn plan_renderer_fills_every_slot() {
        let p = PromptSet::default();
        let valid: BTreeSet<String> = ["tx_busy".to_string()].into();
        let r = PlanPromptRenderer::new(&p.nl_plan, "tx_busy", &valid, p.plan_examples.text());
        let parts = PromptParts {
            global_summary: "G".into(),
            signal_desc: "D".into(),
            rag: vec![item(ContextType::Rag, 1, 1.0)],
            kg: vec![],
        };
        let t = r.render(&parts).unwrap();
        assert!(t.contains("signal 'tx_busy'"));
        assert!(t.contains("Signal description:\nD"));
        assert!(t.contains("GRW-AS Context:\n(none)"));
    }

    #[test]
    fn drop_lowest_prefers_global_minimum() {
        let mut p = PromptParts {
            rag: vec![item(ContextType::Rag, 1, 0.5), item(ContextType::Rag, 1, 0.2)],
            kg: vec![item(ContextType::KgPath, 1, 0.3)],
            ..Default::default()
        };
        assert!(p.drop_lowest());
        assert_eq!(p.rag.len(), 1);
        assert!(p.drop_lowest());
        assert!(p.kg.is_empty());
        assert!(p.drop_lowest());
        assert!(!p.drop_lowest());
    }
}
