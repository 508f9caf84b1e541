use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig};
use crate::context::{ContextItem, ContextType};
use crate::kg::{Graph, NodeId};
use crate::llm::{LlmProvider, TokenCounter};
use crate::refine::{port_id, signal_id};
use crate::retrieval::{chunks_to_contexts, ChunkIndex};
use crate::rtl::RtlDesign;
use crate::synthesis::{
    assemble_prompts, generate_plans, generate_signal_description, generate_svas, prune, AssemblyConfig,
    ContextCache, PlanOutput, PlanPromptRenderer, PromptBundle, PruneReport, SummaryInputs, SvaOutput,
};
use crate::template::PromptSet;
use crate::walk::{path_to_text, VerbTable, WalkEngine, WalkPath, DISPLAY_CAP};

/// Graph node standing for a valid signal of the top module.
pub fn signal_node(design: &RtlDesign, top: &str, name: &str) -> Option<NodeId> {
    let m = design.module(top)?;
    if m.port(name).is_some() {
        return Some(port_id(top, name));
    }
    m.signal(name).map(|s| signal_id(top, name, s.kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkDump {
    pub ordinal: usize,
    pub path: WalkPath,
    pub text: String,
}

/// Rendered walks as `kg_path` candidates. A path scores the share of the
/// other architectural signals it discovered.
pub fn kg_path_contexts(g: &Graph, signal: &str, paths: &[WalkPath], targets: usize, verbs: &VerbTable) -> (Vec<WalkDump>, Vec<ContextItem>) {
    let denom = targets.saturating_sub(1).max(1) as f64;
    let mut dumps = Vec::with_capacity(paths.len());
    let mut items = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let text = path_to_text(g, p, verbs, DISPLAY_CAP).to_string();
        items.push(
            ContextItem::new(ContextType::KgPath, signal, text.trim_end())
                .with_score(p.discovered_signals.len() as f64 / denom)
                .with_provenance(format!("walk {i}"))
                .with_ordinal(i),
        );
        dumps.push(WalkDump {
            ordinal: i,
            path: p.clone(),
            text,
        });
    }
    (dumps, items)
}

/// Shared read-only state for the per-signal loop.
pub struct SignalEnv<'a> {
    pub cfg: &'a RunConfig,
    pub graph: &'a Graph,
    pub engine: &'a WalkEngine<'a>,
    pub arch: &'a BTreeMap<String, NodeId>,
    pub verbs: &'a VerbTable,
    pub index: &'a ChunkIndex,
    pub llm: &'a dyn LlmProvider,
    pub prompts: &'a PromptSet,
    pub inputs: SummaryInputs<'a>,
    pub summaries: &'a [ContextItem],
    pub cache: &'a ContextCache,
    pub counter: &'a dyn TokenCounter,
    pub token_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalArtifacts {
    pub signal: String,
    pub walks: Vec<WalkDump>,
    /// Retrieved and walked candidates before pruning.
    pub candidates: Vec<ContextItem>,
    pub description: ContextItem,
    /// Pruned items plus the pass-through description.
    pub contexts: Vec<ContextItem>,
    pub prune_report: PruneReport,
    pub bundle: PromptBundle,
    pub plans: PlanOutput,
    pub svas: SvaOutput,
    /// Provider calls that failed or degraded.
    pub provider_failures: usize,
}

impl SignalArtifacts {
    pub fn succeeded(&self) -> bool {
        self.svas.records.iter().any(|r| !r.missing)
    }
}

pub fn run_signal(env: &SignalEnv<'_>, signal: &str) -> Result<SignalArtifacts, PipelineError> {
    let start = env
        .arch
        .get(signal)
        .ok_or_else(|| PipelineError::Other(format!("signal {signal} has no graph node")))?;
    let paths = env.engine.run_walks(start, signal).map_err(|e| PipelineError::Other(e.to_string()))?;
    let (walks, kg_items) = kg_path_contexts(env.graph, signal, &paths, env.arch.len(), env.verbs);

    let hits = env
        .index
        .retrieve(signal, env.cfg.retrieval.top_k)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    let mut candidates = chunks_to_contexts(signal, &hits);
    candidates.extend(kg_items);

    let synth = |e: crate::synthesis::SynthesisError| PipelineError::Other(format!("{signal}: {e}"));
    let description = generate_signal_description(
        env.llm,
        env.prompts,
        signal,
        env.inputs,
        env.cache,
        env.counter,
        env.token_limit,
    )
    .map_err(synth)?;
    let mut failures = usize::from(description.degraded);

    let (pruned, prune_report) =
        prune(env.llm, &env.prompts.pruner, signal, signal, &candidates, &env.cfg.pruner).map_err(synth)?;

    let mut preamble = env.summaries.to_vec();
    preamble.push(description.clone());
    let renderer = PlanPromptRenderer::new(&env.prompts.nl_plan, signal, env.inputs.valid_signals, env.prompts.plan_examples.text());
    let bundle = assemble_prompts(
        signal,
        &preamble,
        &pruned,
        &renderer,
        env.counter,
        AssemblyConfig {
            budget: env.cfg.prompt_budget,
            token_limit: env.token_limit,
        },
    )
    .map_err(synth)?;

    let plans = generate_plans(env.llm, &bundle, env.inputs.valid_signals);
    failures += plans.failed_prompts.len();
    let svas = if plans.plans.is_empty() {
        SvaOutput::default()
    } else {
        generate_svas(env.llm, &env.prompts.sva, env.prompts.sva_examples.text(), &bundle, &plans.plans, env.counter)
            .map_err(synth)?
    };
    failures += svas.failed_calls;

    let mut contexts = vec![description.clone()];
    contexts.extend(pruned);
    Ok(SignalArtifacts {
        signal: signal.to_string(),
        walks,
        candidates,
        description,
        contexts,
        prune_report,
        bundle,
        plans,
        svas,
        provider_failures: failures,
    })
}

/// Valid signals that have a node in the graph, keyed by name.
pub(crate) fn arch_nodes(
    design: &RtlDesign,
    top: &str,
    g: &Graph,
    valid: &BTreeSet<String>,
) -> BTreeMap<String, NodeId> {
    valid
        .iter()
        .filter_map(|s| signal_node(design, top, s).filter(|id| g.contains_node(id)).map(|id| (s.clone(), id)))
        .collect()
}
