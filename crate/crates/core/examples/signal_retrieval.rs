//! Builds the multi-scale chunk index over spec and RTL text and
//! retrieves the best chunks for a signal.

use std::path::Path;
use std::sync::Arc;

use kgsva::retrieval::{ChunkIndex, Document, GridConfig, HashingEmbedder, Source};
use kgsva::tokenize::WordTokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let uart = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/uart");
    let docs = vec![
        Document::new("spec", std::fs::read_to_string(uart.join("spec.txt"))?, Source::Spec),
        Document::new("uart_tx.v", std::fs::read_to_string(uart.join("rtl/uart_tx.v"))?, Source::Rtl),
    ];
    let index = ChunkIndex::build(&docs, &GridConfig::default(), Arc::new(WordTokenizer), Arc::new(HashingEmbedder::default()))?;
    println!("{} chunks", index.chunks().len());

    let signal = std::env::args().nth(1).unwrap_or_else(|| "tx_busy".into());
    for r in index.retrieve(&signal, 5)? {
        let c = r.chunk;
        let preview: String = c.text.chars().take(70).collect::<String>().replace('\n', " ");
        println!("{:.3} (sparse {:.3}, dense {:.3}) {} s{} o{}: {preview}", r.score, r.sparse, r.dense, c.doc_id, c.scale, c.overlap_ratio);
    }
    Ok(())
}
