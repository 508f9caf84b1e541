//! Prunes candidate contexts with a scripted selector and packs the
//! survivors into token-limited prompts.

use std::collections::BTreeSet;

use kgsva::context::{ContextItem, ContextType};
use kgsva::llm::{prompt_token_limit, HeuristicCounter, MockProvider, MockRule, MockScript};
use kgsva::synthesis::{assemble_prompts, prune, AssemblyConfig, PlanPromptRenderer, PrunerConfig};
use kgsva::template::PromptSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompts = PromptSet::default();
    let llm = MockProvider::new(MockScript::new(vec![
        MockRule::contains(&["of type 'rag'"], "Selected contexts: [0, 2, 5]"),
        MockRule::contains(&["of type 'kg_path'"], "no idea"),
    ]));

    let mut candidates = Vec::new();
    for i in 0..8 {
        let text = format!("tx_busy rises when new_tx_data is accepted (excerpt {i}) ").repeat(40);
        candidates.push(ContextItem::new(ContextType::Rag, "tx_busy", text).with_score(1.0 - i as f64 / 10.0));
        let path = format!("Path {i}: tx_busy (port in uart_top) connects to tx_busy (port in uart_tx)");
        candidates.push(ContextItem::new(ContextType::KgPath, "tx_busy", path).with_score(0.5 + i as f64 / 20.0));
    }
    let (kept, report) = prune(&llm, &prompts.pruner, "tx_busy", "tx_busy", &candidates, &PrunerConfig::default())?;
    println!("kept {} of {}: {report:?}", kept.len(), candidates.len());

    let valid: BTreeSet<String> = ["clock", "reset", "tx_busy", "new_tx_data"].map(String::from).into();
    let renderer = PlanPromptRenderer::new(&prompts.nl_plan, "tx_busy", &valid, prompts.plan_examples.text());
    let summaries = vec![ContextItem::new(ContextType::SummaryDesign, "", "A UART with a 16x baud generator.")];
    let cfg = AssemblyConfig {
        budget: 3,
        token_limit: prompt_token_limit(2_000),
    };
    let bundle = assemble_prompts("tx_busy", &summaries, &kept, &renderer, &HeuristicCounter, cfg)?;
    for (i, p) in bundle.prompts.iter().enumerate() {
        println!("prompt {i}: {} tokens (limit {})", p.token_count, cfg.token_limit);
    }
    Ok(())
}
