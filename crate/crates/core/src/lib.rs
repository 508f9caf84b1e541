//! Knowledge-graph guided SystemVerilog assertion generation.
//!
//! The pipeline fuses a specification-derived knowledge graph with facts
//! extracted from RTL, retrieves specification text per signal, walks the
//! graph toward architectural signals, and packs the resulting context into
//! prompts for assertion generation.

pub mod context;
pub mod ingest;
pub mod kg;
pub mod llm;
pub mod matching;
pub mod pipeline;
pub mod refine;
pub mod retrieval;
pub mod rtl;
pub mod sva;
pub mod synthesis;
pub mod template;
pub mod tokenize;
pub mod walk;
