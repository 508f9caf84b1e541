//! Initial knowledge graph from specification text: chunking, LLM
//! extraction against the schema, description summarization and assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kg::{
    Graph, KgEdge, KgNode, NodeId, Schema, ATTR_ORIGIN, DESCRIPTION_SEPARATOR, ORIGIN_SPEC,
};
use crate::llm::{is_echo, LlmError, LlmProvider, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::template::PromptSet;
use crate::tokenize::{windows, Tokenizer};

/// Type given to nodes created for relation endpoints that were never
/// extracted as entities.
pub const PLACEHOLDER_TYPE: &str = "Component";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub doc_id: String,
    pub text: String,
    pub source_path: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read specification {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("specification {0} is empty")]
    Empty(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
}

impl SpecDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        SpecDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            source_path: String::new(),
        }
    }

    /// Reads a plain-text specification; the doc id is the file stem.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if text.trim().is_empty() {
            return Err(IngestError::Empty(path.display().to_string()));
        }
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "spec".into());
        Ok(SpecDocument {
            doc_id,
            text,
            source_path: path.display().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecChunk {
    pub chunk_id: String,
    pub token_start: usize,
    pub byte_start: usize,
    pub text: String,
}

/// Overlapping token windows for extraction. Ids are `doc_id-NNNN`.
pub fn chunk_for_extraction(
    doc: &SpecDocument,
    tokenizer: &dyn Tokenizer,
    chunk_tokens: usize,
    overlap_tokens: usize,
) -> Vec<SpecChunk> {
    assert!(
        chunk_tokens > overlap_tokens,
        "chunk size must exceed overlap"
    );
    windows(tokenizer, &doc.text, chunk_tokens, chunk_tokens - overlap_tokens)
        .into_iter()
        .enumerate()
        .map(|(i, w)| SpecChunk {
            chunk_id: format!("{}-{i:04}", doc.doc_id),
            token_start: w.token_start,
            byte_start: w.byte_range.start,
            text: doc.text[w.byte_range].to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedEntity {
    pub name: String,
    pub entity_type: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRelation {
    pub src: String,
    pub dst: String,
    pub relation_type: String,
    pub description: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub chunk_id: String,
    pub entities: Vec<ExtractedEntity>,
    pub relations: Vec<ExtractedRelation>,
}

impl ExtractionRecord {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub skipped_lines: usize,
    pub dropped_entities: usize,
    pub dropped_relations: usize,
}

impl std::ops::AddAssign for ExtractionStats {
    fn add_assign(&mut self, o: Self) {
        self.skipped_lines += o.skipped_lines;
        self.dropped_entities += o.dropped_entities;
        self.dropped_relations += o.dropped_relations;
    }
}

const FIELD_DELIM: &str = "<|>";

fn clean_field(s: &str) -> String {
    s.trim().trim_matches('"').trim().to_string()
}

/// Parses one reply line into its tuple fields, or `None` when the line is
/// not a record.
fn record_fields(line: &str) -> Option<Vec<String>> {
    let line = line.trim().trim_end_matches("##").trim();
    let inner = line.strip_prefix('(')?;
    let inner = inner.strip_suffix(')').unwrap_or(inner);
    let fields: Vec<String> = inner.split(FIELD_DELIM).map(clean_field).collect();
    (fields.len() >= 2).then_some(fields)
}

/// Parses an extraction reply. Records may be newline- or `##`-separated.
/// Types outside `schema` are dropped; malformed lines are skipped.
pub fn parse_extraction_reply(
    reply: &str,
    schema: &Schema,
    chunk_id: &str,
) -> (ExtractionRecord, ExtractionStats) {
    let mut rec = ExtractionRecord {
        chunk_id: chunk_id.to_string(),
        ..Default::default()
    };
    let mut stats = ExtractionStats::default();
    for line in reply.lines().flat_map(|l| l.split("##")) {
        if line.trim().is_empty() {
            continue;
        }
        let Some(f) = record_fields(line) else {
            if !line.trim().eq_ignore_ascii_case("<|COMPLETE|>") {
                stats.skipped_lines += 1;
            }
            continue;
        };
        match f[0].to_ascii_lowercase().as_str() {
            "entity" if f.len() >= 3 && !f[1].is_empty() => {
                match schema.canonical_entity(&f[2]) {
                    Some(t) => rec.entities.push(ExtractedEntity {
                        name: f[1].clone(),
                        entity_type: t.to_string(),
                        description: f.get(3).cloned().unwrap_or_default(),
                    }),
                    None => stats.dropped_entities += 1,
                }
            }
            "relationship" if f.len() >= 4 && !f[1].is_empty() && !f[2].is_empty() => {
                match schema.canonical_relation(&f[3]) {
                    Some(r) => {
                        let weight = f
                            .get(5)
                            .and_then(|w| w.parse::<f64>().ok())
                            .filter(|w| w.is_finite() && *w >= 0.0)
                            .unwrap_or(1.0);
                        rec.relations.push(ExtractedRelation {
                            src: f[1].clone(),
                            dst: f[2].clone(),
                            relation_type: r.to_string(),
                            description: f.get(4).cloned().unwrap_or_default(),
                            weight,
                        });
                    }
                    None => stats.dropped_relations += 1,
                }
            }
            _ => stats.skipped_lines += 1,
        }
    }
    (rec, stats)
}

/// Renders the extraction prompt for one chunk.
pub fn extraction_prompt(prompts: &PromptSet, schema: &Schema, chunk_text: &str) -> String {
    prompts
        .entity_extraction
        .fill(&[
            ("entity_types", &schema.entity_types().join(", ")),
            ("relation_types", &schema.relation_types().join(", ")),
            ("input_text", chunk_text),
        ])
        .expect("bundled extraction template slots")
}

pub fn extract_chunk(
    llm: &dyn LlmProvider,
    prompts: &PromptSet,
    schema: &Schema,
    chunk: &SpecChunk,
) -> Result<(ExtractionRecord, ExtractionStats), LlmError> {
    let prompt = extraction_prompt(prompts, schema, &chunk.text);
    let reply = llm.complete(&prompt, DEFAULT_MAX_OUTPUT_TOKENS)?;
    let (rec, stats) = parse_extraction_reply(&reply, schema, &chunk.chunk_id);
    if rec.is_empty() {
        log::warn!(
            "chunk {}: no entities or relations in reply ({} lines skipped)",
            chunk.chunk_id,
            stats.skipped_lines
        );
    }
    Ok((rec, stats))
}

/// Lower-cased, whitespace-collapsed name used for entity merging.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

pub fn spec_node_id(entity_type: &str, name: &str) -> NodeId {
    NodeId::new(format!("spec::{entity_type}::{}", normalize_name(name)))
}

#[derive(Default)]
struct PendingNode {
    names: BTreeSet<String>,
    description: String,
    sources: BTreeSet<String>,
}

/// Folds extraction records into a graph. Records are processed in chunk-id
/// order, so the result does not depend on the order they are passed in.
///
/// Entities sharing a normalized name but not a type stay separate nodes.
/// Relation endpoints resolve by normalized name (smallest node id when
/// several types match); unknown endpoints become [`PLACEHOLDER_TYPE`]
/// nodes, or the relation is dropped if the schema lacks that type.
pub fn assemble_graph(records: &[ExtractionRecord], schema: &Schema) -> Graph {
    let mut sorted: Vec<&ExtractionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.chunk_id.cmp(&b.chunk_id));

    let mut pending: BTreeMap<NodeId, (String, PendingNode)> = BTreeMap::new();
    let mut by_name: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
    for rec in &sorted {
        for e in &rec.entities {
            let id = spec_node_id(&e.entity_type, &e.name);
            let (_, p) = pending
                .entry(id.clone())
                .or_insert_with(|| (e.entity_type.clone(), PendingNode::default()));
            p.names.insert(e.name.trim().to_string());
            crate::kg::merge_description(&mut p.description, &e.description);
            p.sources.insert(rec.chunk_id.clone());
            by_name.entry(normalize_name(&e.name)).or_default().insert(id);
        }
    }

    let placeholder_ok = schema.canonical_entity(PLACEHOLDER_TYPE) == Some(PLACEHOLDER_TYPE);
    let mut edges = Vec::new();
    for rec in &sorted {
        for r in &rec.relations {
            let mut ends = Vec::with_capacity(2);
            for name in [&r.src, &r.dst] {
                let norm = normalize_name(name);
                let id = match by_name.get(&norm).and_then(|s| s.first()) {
                    Some(id) => id.clone(),
                    None if placeholder_ok => {
                        let id = spec_node_id(PLACEHOLDER_TYPE, name);
                        let (_, p) = pending.entry(id.clone()).or_insert_with(|| {
                            (PLACEHOLDER_TYPE.to_string(), PendingNode::default())
                        });
                        p.names.insert(name.trim().to_string());
                        p.sources.insert(rec.chunk_id.clone());
                        id
                    }
                    None => break,
                };
                ends.push(id);
            }
            if ends.len() == 2 {
                let dst = ends.pop().unwrap();
                let src = ends.pop().unwrap();
                edges.push(
                    KgEdge::new(src, dst, r.relation_type.clone())
                        .with_weight(r.weight)
                        .with_description(r.description.trim())
                        .with_source(rec.chunk_id.clone()),
                );
            }
        }
    }

    let mut g = Graph::new();
    for (id, (ty, p)) in pending {
        // smallest spelling wins so the display name is order-independent
        let name = p.names.first().cloned().unwrap_or_default();
        let mut node = KgNode::new(id, name, ty)
            .with_description(p.description)
            .with_attr(ATTR_ORIGIN, ORIGIN_SPEC);
        node.source_ids = p.sources.into_iter().collect();
        g.add_node(node).expect("fresh spec node");
    }
    for e in edges {
        g.add_edge(e).expect("endpoints were inserted");
    }
    g
}

/// Merges description pieces into one. One piece is returned as is; with a
/// provider failure, an empty reply or a mock echo, the pieces are joined
/// with `"; "`.
pub fn summarize_merged_description(
    llm: &dyn LlmProvider,
    prompts: &PromptSet,
    name: &str,
    pieces: &[String],
) -> String {
    let joined = pieces.join(DESCRIPTION_SEPARATOR);
    if pieces.len() <= 1 {
        return joined;
    }
    let list: String = pieces.iter().map(|p| format!("- {p}\n")).collect();
    let prompt = prompts
        .description_summary
        .fill(&[("entity_name", name), ("description_list", &list)])
        .expect("bundled summary template slots");
    match llm.complete(&prompt, DEFAULT_MAX_OUTPUT_TOKENS) {
        Ok(reply) if !reply.trim().is_empty() && !is_echo(&reply) => reply.trim().to_string(),
        Ok(_) => joined,
        Err(e) => {
            log::warn!("description summary for {name} failed ({e}); keeping concatenation");
            joined
        }
    }
}

/// Replaces every node and edge description longer than `threshold`
/// characters with an LLM summary of its pieces. Returns the number of
/// descriptions summarized.
pub fn summarize_long_descriptions(
    g: &mut Graph,
    llm: &dyn LlmProvider,
    prompts: &PromptSet,
    threshold: usize,
) -> usize {
    let node_jobs: Vec<(NodeId, String, Vec<String>)> = g
        .nodes()
        .filter(|n| n.description.chars().count() > threshold)
        .map(|n| (n.id.clone(), n.name.clone(), split_pieces(&n.description)))
        .collect();
    let edge_jobs: Vec<(crate::kg::EdgeKey, String, Vec<String>)> = g
        .edges()
        .filter(|e| e.description.chars().count() > threshold)
        .map(|e| {
            let name = format!("{} -> {}", e.src, e.dst);
            (e.key(), name, split_pieces(&e.description))
        })
        .collect();
    let node_out: Vec<String> = node_jobs
        .par_iter()
        .map(|(_, name, pieces)| summarize_merged_description(llm, prompts, name, pieces))
        .collect();
    let edge_out: Vec<String> = edge_jobs
        .par_iter()
        .map(|(_, name, pieces)| summarize_merged_description(llm, prompts, name, pieces))
        .collect();
    let count = node_jobs.len() + edge_jobs.len();
    for ((id, _, _), d) in node_jobs.into_iter().zip(node_out) {
        g.node_mut(&id).expect("node exists").description = d;
    }
    for ((key, _, _), d) in edge_jobs.into_iter().zip(edge_out) {
        g.edge_mut(&key).expect("edge exists").description = d;
    }
    count
}

fn split_pieces(description: &str) -> Vec<String> {
    description
        .split(DESCRIPTION_SEPARATOR)
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct IngestConfig {
    pub chunk_tokens: usize,
    pub overlap_tokens: usize,
    pub summarize_threshold_chars: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            chunk_tokens: 1200,
            overlap_tokens: 100,
            summarize_threshold_chars: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutput {
    pub graph: Graph,
    pub records: Vec<ExtractionRecord>,
    pub stats: ExtractionStats,
    pub summarized: usize,
}

/// Chunks, extracts (in parallel), assembles and summarizes.
pub fn build_initial_graph(
    doc: &SpecDocument,
    llm: &dyn LlmProvider,
    prompts: &PromptSet,
    schema: &Schema,
    tokenizer: &dyn Tokenizer,
    cfg: &IngestConfig,
) -> Result<IngestOutput, LlmError> {
    let chunks = chunk_for_extraction(doc, tokenizer, cfg.chunk_tokens, cfg.overlap_tokens);
    let results: Vec<Result<(ExtractionRecord, ExtractionStats), LlmError>> = chunks
        .par_iter()
        .map(|c| extract_chunk(llm, prompts, schema, c))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut stats = ExtractionStats::default();
    for r in results {
        let (rec, s) = r?;
        records.push(rec);
        stats += s;
    }
    let mut graph = assemble_graph(&records, schema);
    let summarized =
        summarize_long_descriptions(&mut graph, llm, prompts, cfg.summarize_threshold_chars);
    Ok(IngestOutput {
        graph,
        records,
        stats,
        summarized,
    })
}
