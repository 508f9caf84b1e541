//! Extracts the initial knowledge graph from the uart spec with the
//! scripted mock provider and prints what was found.

use std::path::Path;

use kgsva::ingest::{build_initial_graph, IngestConfig, SpecDocument};
use kgsva::kg::Schema;
use kgsva::llm::{MockProvider, MockScript};
use kgsva::template::PromptSet;
use kgsva::tokenize::WordTokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let uart = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/uart");
    let doc = SpecDocument::load(&uart.join("spec.txt"))?;
    let llm = MockProvider::new(MockScript::load_dir(&uart.join("mock"))?);
    let out = build_initial_graph(&doc, &llm, &PromptSet::default(), &Schema::hardware(), &WordTokenizer, &IngestConfig::default())?;

    println!("{} nodes, {} edges from {} chunk(s)", out.graph.node_count(), out.graph.edge_count(), out.records.len());
    for n in out.graph.nodes() {
        println!("  {:<10} {}", n.node_type.as_str(), n.name);
    }
    for e in out.graph.edges().take(10) {
        println!("  {} -[{}]-> {}", e.src, e.relation.as_str(), e.dst);
    }
    Ok(())
}
