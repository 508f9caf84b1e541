use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{ContextCache, SynthesisError};
use crate::context::{ContextItem, ContextType};
use crate::llm::{LlmProvider, TokenCounter, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::template::{PromptSet, Template};

#[derive(Debug, Clone, Copy)]
pub struct SummaryInputs<'a> {
    pub spec_text: &'a str,
    pub rtl_text: &'a str,
    pub valid_signals: &'a BTreeSet<String>,
}

const CUT_MARKER: &str = "\n[...]";

fn cut(s: &str, chars: usize) -> String {
    match s.char_indices().nth(chars) {
        Some((i, _)) => format!("{}{CUT_MARKER}", &s[..i]),
        None => s.to_string(),
    }
}

/// Renders `template`, shortening the `shrinkable` slots proportionally
/// until the prompt fits in `limit` tokens (or they are empty).
pub fn fit_prompt(
    template: &Template,
    values: &BTreeMap<&str, String>,
    shrinkable: &[&str],
    counter: &dyn TokenCounter,
    limit: usize,
) -> Result<String, SynthesisError> {
    let mut vals = values.clone();
    for _ in 0..16 {
        let text = template.render(&vals)?;
        let n = counter.count(&text);
        if n <= limit {
            return Ok(text);
        }
        let ratio = limit as f64 / n as f64 * 0.9;
        let mut changed = false;
        for s in shrinkable {
            if let Some(v) = vals.get(s) {
                let len = v.chars().count();
                if len > CUT_MARKER.len() {
                    let keep = ((len as f64) * ratio) as usize;
                    vals.insert(s, cut(v, keep.min(len.saturating_sub(CUT_MARKER.len() + 1))));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let text = template.render(&vals)?;
    log::warn!("prompt {} still exceeds {limit} tokens after shortening", template.name());
    Ok(text)
}

fn call_cached(
    llm: &dyn LlmProvider,
    cache: &ContextCache,
    ctx_type: ContextType,
    signal: &str,
    prompt: &str,
    template: &str,
) -> ContextItem {
    let key = ContextCache::key(&["context-v1", ctx_type.as_str(), signal, llm.model_id(), prompt]);
    if let Some(hit) = cache.get(&key) {
        return hit;
    }
    let item = match llm.complete(prompt, DEFAULT_MAX_OUTPUT_TOKENS) {
        Ok(reply) if !reply.trim().is_empty() => ContextItem::new(ctx_type, signal, reply.trim())
            .with_score(1.0)
            .with_provenance(format!("template:{template}")),
        Ok(_) => degraded(ctx_type, signal, "empty reply"),
        Err(e) => {
            log::warn!("{ctx_type} for '{signal}' unavailable: {e}");
            degraded(ctx_type, signal, &e.to_string())
        }
    };
    cache.put(&key, &item);
    item
}

fn degraded(ctx_type: ContextType, signal: &str, why: &str) -> ContextItem {
    ContextItem::new(ctx_type, signal, format!("[{ctx_type} unavailable]"))
        .with_provenance(format!("degraded: {why}"))
        .mark_degraded()
}

/// Design, RTL, signal and pattern summaries, one provider call each,
/// cached by prompt content.
pub fn generate_global_summaries(
    llm: &dyn LlmProvider,
    prompts: &PromptSet,
    inputs: SummaryInputs<'_>,
    cache: &ContextCache,
    counter: &dyn TokenCounter,
    token_limit: usize,
) -> Result<Vec<ContextItem>, SynthesisError> {
    let signals_str = inputs.valid_signals.iter().cloned().collect::<Vec<_>>().join(", ");
    let values: BTreeMap<&str, String> = [
        ("spec_text", inputs.spec_text.to_string()),
        ("rtl_text", inputs.rtl_text.to_string()),
        ("signals_str", signals_str),
    ]
    .into_iter()
    .collect();
    let jobs = [
        (ContextType::SummaryDesign, &prompts.design_summary),
        (ContextType::SummaryRtl, &prompts.rtl_summary),
        (ContextType::SummarySignals, &prompts.signals_summary),
        (ContextType::SummaryPatterns, &prompts.patterns_summary),
    ];
    let rendered: Vec<(ContextType, String, &str)> = jobs
        .iter()
        .map(|(t, tpl)| Ok((*t, fit_prompt(tpl, &values, &["spec_text", "rtl_text"], counter, token_limit)?, tpl.name())))
        .collect::<Result<_, SynthesisError>>()?;
    Ok(rendered
        .par_iter()
        .map(|(t, prompt, name)| call_cached(llm, cache, *t, "", prompt, name))
        .collect())
}

/// Detailed description of one valid signal, cached per signal.
pub fn generate_signal_description(
    llm: &dyn LlmProvider,
    prompts: &PromptSet,
    signal: &str,
    inputs: SummaryInputs<'_>,
    cache: &ContextCache,
    counter: &dyn TokenCounter,
    token_limit: usize,
) -> Result<ContextItem, SynthesisError> {
    if !inputs.valid_signals.contains(signal) {
        return Err(SynthesisError::UnknownSignal(signal.to_string()));
    }
    let values: BTreeMap<&str, String> = [
        ("signal_name", signal.to_string()),
        ("spec_text", inputs.spec_text.to_string()),
        ("rtl_text", inputs.rtl_text.to_string()),
    ]
    .into_iter()
    .collect();
    let tpl = &prompts.signal_description;
    let prompt = fit_prompt(tpl, &values, &["spec_text", "rtl_text"], counter, token_limit)?;
    Ok(call_cached(llm, cache, ContextType::SignalDesc, signal, &prompt, tpl.name()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{HeuristicCounter, MockProvider, MockRule, MockScript};

    fn signals() -> BTreeSet<String> {
        ["tx_busy".to_string(), "clock".to_string()].into()
    }

    fn inputs(s: &BTreeSet<String>) -> SummaryInputs<'_> {
        SummaryInputs {
            spec_text: "The UART transmits bytes.",
            rtl_text: "module uart_top(input clock); endmodule",
            valid_signals: s,
        }
    }

    #[test]
    fn four_summaries_then_cache() {
        let llm = MockProvider::echo();
        let cache = ContextCache::in_memory();
        let s = signals();
        let p = PromptSet::default();
        let a = generate_global_summaries(&llm, &p, inputs(&s), &cache, &HeuristicCounter, 96_000).unwrap();
        let types: BTreeSet<_> = a.iter().map(|i| i.ctx_type).collect();
        assert_eq!(types.len(), 4);
        assert_eq!(llm.total_calls(), 4);
        let b = generate_global_summaries(&llm, &p, inputs(&s), &cache, &HeuristicCounter, 96_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(llm.total_calls(), 4);
    }

    #[test]
    fn one_failure_degrades_one_item() {
        let llm = MockProvider::new(MockScript::new(vec![MockRule::failing(&["module hierarchy"], "down")]));
        let s = signals();
        let p = PromptSet::default();
        let out = generate_global_summaries(&llm, &p, inputs(&s), &ContextCache::in_memory(), &HeuristicCounter, 96_000).unwrap();
        let bad: Vec<_> = out.iter().filter(|i| i.degraded).map(|i| i.ctx_type).collect();
        assert_eq!(bad, [ContextType::SummaryRtl]);
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn signal_description_contains_name_and_checks_validity() {
        let llm = MockProvider::new(MockScript::new(vec![MockRule::contains(&["'tx_busy'"], "tx_busy flags a send")]));
        let s = signals();
        let p = PromptSet::default();
        let cache = ContextCache::in_memory();
        let item = generate_signal_description(&llm, &p, "tx_busy", inputs(&s), &cache, &HeuristicCounter, 96_000).unwrap();
        assert_eq!(item.ctx_type, ContextType::SignalDesc);
        assert_eq!(item.text, "tx_busy flags a send");
        generate_signal_description(&llm, &p, "tx_busy", inputs(&s), &cache, &HeuristicCounter, 96_000).unwrap();
        assert_eq!(llm.total_calls(), 1);
        assert!(matches!(
            generate_signal_description(&llm, &p, "nope", inputs(&s), &cache, &HeuristicCounter, 96_000),
            Err(SynthesisError::UnknownSignal(_))
        ));
    }

    #[test]
    fn fit_prompt_shrinks_inputs() {
        let t = Template::new("t", "Spec:\n{spec_text}\n");
        let values = [("spec_text", "word ".repeat(5000))].into_iter().collect();
        let out = fit_prompt(&t, &values, &["spec_text"], &HeuristicCounter, 1000).unwrap();
        assert!(HeuristicCounter.count(&out) <= 1000);
        assert!(out.contains("[...]"));
    }
}
