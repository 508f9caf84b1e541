use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PromptBundle, PromptParts, SynthesisError};
use crate::llm::{LlmProvider, TokenCounter, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::template::Template;

pub const PLAN_PREFIX: &str = "Plan: ";
pub const SVA_PREFIX: &str = "SVA:";
pub const PLANS_PER_CALL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub prompt_ordinal: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub plans: Vec<Plan>,
    /// Plans naming no valid signal.
    pub discarded: usize,
    pub failed_prompts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvaRecord {
    pub signal: String,
    pub plan: String,
    pub sva_text: String,
    pub prompt_ordinal: usize,
    pub syntax_ok: Option<bool>,
    /// No assertion block came back for this plan.
    #[serde(default)]
    pub missing: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvaOutput {
    pub records: Vec<SvaRecord>,
    /// Fenced blocks without the `SVA:` prefix.
    pub ignored_blocks: usize,
    pub failed_calls: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SvaBlocks {
    pub blocks: Vec<String>,
    pub ignored: usize,
}

fn strip_bullet(line: &str) -> &str {
    let l = line.trim_start();
    for b in ["- ", "* ", "• "] {
        if let Some(r) = l.strip_prefix(b) {
            return r.trim_start();
        }
    }
    let digits = l.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        if let Some(r) = l[digits..].strip_prefix(". ").or_else(|| l[digits..].strip_prefix(") ")) {
            return r.trim_start();
        }
    }
    l
}

fn names_valid_signal(text: &str, valid: &BTreeSet<String>) -> bool {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '$'))
        .any(|w| valid.contains(w))
}

/// Lines starting with `Plan: ` (optionally bulleted). Returns the kept
/// plans and how many were dropped for naming no valid signal.
pub fn extract_plans(reply: &str, valid: &BTreeSet<String>) -> (Vec<String>, usize) {
    let mut kept = Vec::new();
    let mut discarded = 0;
    for line in reply.lines() {
        let Some(rest) = strip_bullet(line).strip_prefix(PLAN_PREFIX) else {
            continue;
        };
        let rest = rest.trim();
        if rest.is_empty() {
            continue;
        }
        if names_valid_signal(rest, valid) {
            kept.push(rest.to_string());
        } else {
            discarded += 1;
        }
    }
    (kept, discarded)
}

/// One plan-generation call per prompt in the bundle.
pub fn generate_plans(llm: &dyn LlmProvider, bundle: &PromptBundle, valid: &BTreeSet<String>) -> PlanOutput {
    let replies: Vec<_> = bundle
        .prompts
        .par_iter()
        .map(|p| (p.ordinal, llm.complete(&p.text, DEFAULT_MAX_OUTPUT_TOKENS)))
        .collect();
    let mut out = PlanOutput::default();
    for (ordinal, reply) in replies {
        match reply {
            Ok(r) => {
                let (plans, discarded) = extract_plans(&r, valid);
                if plans.is_empty() && discarded == 0 {
                    log::warn!("{}: prompt {ordinal} produced no plans", bundle.signal);
                }
                out.discarded += discarded;
                out.plans.extend(plans.into_iter().map(|text| Plan { prompt_ordinal: ordinal, text }));
            }
            Err(e) => {
                log::warn!("{}: plan prompt {ordinal} failed: {e}", bundle.signal);
                out.failed_prompts.push(ordinal);
            }
        }
    }
    if out.plans.is_empty() {
        log::warn!("{}: no usable plans", bundle.signal);
    }
    out
}

fn fence(line: &str) -> Option<&str> {
    line.trim_start().strip_prefix("```")
}

/// Fenced blocks carrying the `SVA:` prefix on the fence line, as the
/// first line inside the block, or on the line just before the fence.
pub fn extract_sva_blocks(reply: &str) -> SvaBlocks {
    let lines: Vec<&str> = reply.lines().collect();
    let mut out = SvaBlocks::default();
    let mut prev_prefix = false;
    let mut i = 0;
    while i < lines.len() {
        let Some(info) = fence(lines[i]) else {
            let t = lines[i].trim();
            if !t.is_empty() {
                prev_prefix = t.ends_with(SVA_PREFIX);
            }
            i += 1;
            continue;
        };
        let mut body = Vec::new();
        let mut j = i + 1;
        while j < lines.len() && fence(lines[j]).is_none() {
            body.push(lines[j]);
            j += 1;
        }
        let mut text = None;
        let info = info.trim();
        if let Some(r) = info.strip_prefix(SVA_PREFIX) {
            text = Some(format!("{}\n{}", r.trim(), body.join("\n")));
        } else if let Some(k) = body.iter().position(|l| !l.trim().is_empty()) {
            if let Some(r) = body[k].trim_start().strip_prefix(SVA_PREFIX) {
                text = Some(format!("{}\n{}", r.trim(), body[k + 1..].join("\n")));
            } else if prev_prefix {
                text = Some(body.join("\n"));
            }
        }
        match text.map(|t| t.trim().to_string()).filter(|t| !t.is_empty()) {
            Some(t) => out.blocks.push(t),
            None => out.ignored += 1,
        }
        prev_prefix = false;
        i = j + 1;
    }
    out
}

fn sva_prompt(
    template: &Template,
    examples: &str,
    signal: &str,
    parts: &PromptParts,
    plans: &[&Plan],
) -> Result<String, SynthesisError> {
    let listed = plans
        .iter()
        .enumerate()
        .map(|(i, p)| format!("Plan {}: {}", i + 1, p.text))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(template.fill(&[
        ("global_summary", &parts.global_summary),
        ("signal_specific_summary", &parts.signal_desc),
        ("rag_context", &parts.rag_text()),
        ("grw_context", &parts.kg_text()),
        ("signal_name", signal),
        ("plans", &listed),
        ("examples", examples),
    ])?)
}

/// Assertion calls over batches of up to three plans, reusing the context
/// of the prompt each plan came from. Blocks pair with plans by position.
pub fn generate_svas(
    llm: &dyn LlmProvider,
    template: &Template,
    examples: &str,
    bundle: &PromptBundle,
    plans: &[Plan],
    counter: &dyn TokenCounter,
) -> Result<SvaOutput, SynthesisError> {
    let mut jobs: Vec<(usize, Vec<&Plan>, Option<String>)> = Vec::new();
    for p in &bundle.prompts {
        let mine: Vec<&Plan> = plans.iter().filter(|x| x.prompt_ordinal == p.ordinal).collect();
        for batch in mine.chunks(PLANS_PER_CALL) {
            let mut parts = p.parts.clone();
            let prompt = loop {
                let text = sva_prompt(template, examples, &bundle.signal, &parts, batch)?;
                if counter.count(&text) <= bundle.token_limit {
                    break Some(text);
                }
                if !parts.drop_lowest() {
                    log::warn!("{}: assertion prompt {} exceeds the token limit", bundle.signal, p.ordinal);
                    break None;
                }
            };
            jobs.push((p.ordinal, batch.to_vec(), prompt));
        }
    }
    let replies: Vec<_> = jobs
        .par_iter()
        .map(|(_, _, prompt)| prompt.as_ref().map(|t| llm.complete(t, DEFAULT_MAX_OUTPUT_TOKENS)))
        .collect();

    let mut out = SvaOutput::default();
    let record = |ordinal: usize, plan: &str, sva: &str, missing: bool| SvaRecord {
        signal: bundle.signal.clone(),
        plan: plan.to_string(),
        sva_text: sva.to_string(),
        prompt_ordinal: ordinal,
        syntax_ok: None,
        missing,
    };
    for ((ordinal, batch, _), reply) in jobs.iter().zip(replies) {
        let blocks = match reply {
            Some(Ok(r)) => extract_sva_blocks(&r),
            Some(Err(e)) => {
                log::warn!("{}: assertion call for prompt {ordinal} failed: {e}", bundle.signal);
                out.failed_calls += 1;
                SvaBlocks::default()
            }
            None => {
                out.failed_calls += 1;
                SvaBlocks::default()
            }
        };
        out.ignored_blocks += blocks.ignored;
        for (k, plan) in batch.iter().enumerate() {
            match blocks.blocks.get(k) {
                Some(b) => out.records.push(record(*ordinal, &plan.text, b, false)),
                None => out.records.push(record(*ordinal, &plan.text, "", true)),
            }
        }
        for b in blocks.blocks.iter().skip(batch.len()) {
            out.records.push(record(*ordinal, "", b, false));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{HeuristicCounter, MockProvider, MockRule, MockScript};
    use crate::synthesis::AssembledPrompt;
    use crate::template::PromptSet;

    fn valid() -> BTreeSet<String> {
        ["tx_busy".to_string(), "new_tx_data".to_string()].into()
    }

    fn bundle(n: usize) -> PromptBundle {
        PromptBundle {
            signal: "tx_busy".into(),
            prompts: (0..n)
                .map(|i| AssembledPrompt {
                    ordinal: i,
                    text: format!("plan prompt #{i}"),
                    token_count: 3,
                    parts: PromptParts::default(),
                })
                .collect(),
            budget: 3,
            token_limit: 96_000,
            dropped: 0,
        }
    }

    #[test]
    fn plan_filter() {
        let (kept, dropped) = extract_plans("Plan: check reset drives tx_busy low\nPlan: verify handshake", &valid());
        assert_eq!(kept, ["check reset drives tx_busy low"]);
        assert_eq!(dropped, 1);
        assert_eq!(extract_plans("no plans here", &valid()), (vec![], 0));
        let (kept, _) = extract_plans("1. Plan: tx_busy rises\n- Plan: new_tx_data pulses", &valid());
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn plans_tagged_by_ordinal() {
        let reply = (0..4).map(|i| format!("Plan: tx_busy case {i}")).collect::<Vec<_>>().join("\n");
        let llm = MockProvider::new(MockScript::new(vec![MockRule::contains(&["plan prompt"], reply)]));
        let out = generate_plans(&llm, &bundle(3), &valid());
        assert_eq!(out.plans.len(), 12);
        for o in 0..3 {
            assert_eq!(out.plans.iter().filter(|p| p.prompt_ordinal == o).count(), 4);
        }
    }

    #[test]
    fn block_extraction() {
        let b = extract_sva_blocks("```\nSVA:\n@(posedge clk) a |-> b\n```");
        assert_eq!(b.blocks, ["@(posedge clk) a |-> b"]);
        let b = extract_sva_blocks("```\nassert property (x);\n```\nSVA:\n```systemverilog\n@(posedge clk) c\n```\n```SVA: @(posedge clk) d\n```");
        assert_eq!(b.blocks, ["@(posedge clk) c", "@(posedge clk) d"]);
        assert_eq!(b.ignored, 1);
        let b = extract_sva_blocks("```\nSVA: @(posedge clk) e |=> f;\n```");
        assert_eq!(b.blocks, ["@(posedge clk) e |=> f;"]);
    }

    #[test]
    fn pairing_flags_missing() {
        let p = PromptSet::default();
        let plans: Vec<Plan> = (0..3)
            .map(|i| Plan {
                prompt_ordinal: 0,
                text: format!("tx_busy plan {i}"),
            })
            .collect();
        let reply = "```\nSVA:\n@(posedge clk) a\n```\n```\nSVA:\n@(posedge clk) b\n```";
        let llm = MockProvider::new(MockScript::new(vec![MockRule::contains(&["Plan 1: tx_busy plan 0"], reply)]));
        let out = generate_svas(&llm, &p.sva, p.sva_examples.text(), &bundle(1), &plans, &HeuristicCounter).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.records[1].sva_text, "@(posedge clk) b");
        assert!(out.records[2].missing && out.records[2].sva_text.is_empty());
        assert_eq!(llm.total_calls(), 1);
    }

    #[test]
    fn batches_of_three_and_surplus() {
        let p = PromptSet::default();
        let plans: Vec<Plan> = (0..4)
            .map(|i| Plan {
                prompt_ordinal: 0,
                text: format!("tx_busy plan {i}"),
            })
            .collect();
        let two = "```\nSVA:\n@(posedge clk) a\n```\n```\nSVA:\n@(posedge clk) b\n```";
        let llm = MockProvider::new(MockScript::new(vec![MockRule::contains(&["Generate one SVA"], two)]));
        let out = generate_svas(&llm, &p.sva, "", &bundle(1), &plans, &HeuristicCounter).unwrap();
        assert_eq!(llm.total_calls(), 2);
        // batch 1: 3 plans, 2 blocks; batch 2: 1 plan, 2 blocks
        assert_eq!(out.records.len(), 5);
        assert_eq!(out.records.iter().filter(|r| r.missing).count(), 1);
        assert_eq!(out.records.iter().filter(|r| r.plan.is_empty()).count(), 1);
    }
}
