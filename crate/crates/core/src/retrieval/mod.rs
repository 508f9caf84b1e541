//! Multi-scale chunk index over specification and RTL text with hybrid
//! sparse (TF-IDF) and dense scoring.

mod embed;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use embed::{EmbedError, EmbeddingProvider, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig};

use crate::context::{ContextItem, ContextType};
use crate::tokenize::{terms, windows, Tokenizer, WordTokenizer};

pub const DEFAULT_SCALES: [usize; 5] = [50, 100, 200, 800, 3200];
pub const DEFAULT_OVERLAPS: [f64; 2] = [0.2, 0.4];
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Spec,
    Rtl,
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("empty query")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid chunking grid: {0}")]
    Grid(String),
    #[error("no documents to index")]
    NoDocuments,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("index cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub scales: Vec<usize>,
    pub overlaps: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            scales: DEFAULT_SCALES.to_vec(),
            overlaps: DEFAULT_OVERLAPS.to_vec(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.scales.is_empty() || self.overlaps.is_empty() {
            return Err(RetrievalError::Grid("scales and overlaps must be non-empty".into()));
        }
        for &s in &self.scales {
            if s == 0 {
                return Err(RetrievalError::Grid("scale 0".into()));
            }
            for &o in &self.overlaps {
                if !(0.0..1.0).contains(&o) {
                    return Err(RetrievalError::Grid(format!("overlap {o} outside [0, 1)")));
                }
                if stride(s, o) == 0 {
                    return Err(RetrievalError::Grid(format!("scale {s} with overlap {o} gives stride 0")));
                }
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.scales
            .iter()
            .flat_map(|&s| self.overlaps.iter().map(move |&o| (s, o)))
            .collect()
    }
}

/// `round(scale * (1 - overlap))`
pub fn stride(scale: usize, overlap: f64) -> usize {
    (scale as f64 * (1.0 - overlap)).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source: Source,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, source: Source) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub scale: usize,
    pub overlap_ratio: f64,
    pub token_start: usize,
    pub token_len: usize,
    pub text: String,
    pub source: Source,
}

/// Sparse vector as (term id, weight) sorted by term id.
pub type SparseVec = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexData {
    tokenizer: String,
    embedder: String,
    grid: GridConfig,
    chunks: Vec<Chunk>,
    sparse: Vec<SparseVec>,
    dense: Vec<Vec<f64>>,
    /// term → (id, document frequency)
    vocabulary: BTreeMap<String, (u32, usize)>,
}

pub struct ChunkIndex {
    data: IndexData,
    idf: Vec<f64>,
    term_ids: HashMap<String, u32>,
    tokenizer: Arc<dyn Tokenizer>,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl std::fmt::Debug for ChunkIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChunkIndex")
            .field("chunks", &self.data.chunks.len())
            .field("vocabulary", &self.data.vocabulary.len())
            .field("embedder", &self.data.embedder)
            .finish()
    }
}

fn idf(n: usize, df: usize) -> f64 {
    ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn sparse_cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    let na: f64 = a.iter().map(|(_, w)| w * w).sum();
    let nb: f64 = b.iter().map(|(_, w)| w * w).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

/// Splits every document at every grid point. Chunk ids sort by document,
/// scale, overlap and offset.
pub fn chunk_documents(docs: &[Document], grid: &GridConfig, tokenizer: &dyn Tokenizer) -> Vec<Chunk> {
    let jobs: Vec<(&Document, usize, f64)> = docs
        .iter()
        .flat_map(|d| grid.pairs().into_iter().map(move |(s, o)| (d, s, o)))
        .collect();
    let per_job: Vec<Vec<Chunk>> = jobs
        .par_iter()
        .map(|&(d, scale, overlap)| {
            windows(tokenizer, &d.text, scale, stride(scale, overlap))
                .into_iter()
                .map(|w| Chunk {
                    chunk_id: format!(
                        "{}@s{scale:05}o{:02}#{:06}",
                        d.doc_id,
                        (overlap * 100.0).round() as u32,
                        w.token_start
                    ),
                    doc_id: d.doc_id.clone(),
                    scale,
                    overlap_ratio: overlap,
                    token_start: w.token_start,
                    token_len: w.token_len,
                    text: d.text[w.byte_range].to_string(),
                    source: d.source,
                })
                .collect()
        })
        .collect();
    per_job.into_iter().flatten().collect()
}

/// Cache key over inputs, grid and vectorizer identities.
pub fn cache_key(docs: &[Document], grid: &GridConfig, tokenizer: &dyn Tokenizer, embedder: &dyn EmbeddingProvider) -> String {
    let mut h = Sha256::new();
    h.update(b"chunk-index-v1\0");
    h.update(tokenizer.name().as_bytes());
    h.update(b"\0");
    h.update(embedder.id().as_bytes());
    h.update(b"\0");
    h.update(serde_json::to_string(grid).expect("grid serializes").as_bytes());
    for d in docs {
        h.update(b"\0");
        h.update(d.doc_id.as_bytes());
        h.update(b"\0");
        h.update(serde_json::to_string(&d.source).expect("source serializes").as_bytes());
        h.update((d.text.len() as u64).to_le_bytes());
        h.update(d.text.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved<'a> {
    pub chunk: &'a Chunk,
    pub score: f64,
    pub sparse: f64,
    pub dense: f64,
}

impl ChunkIndex {
    pub fn build(
        docs: &[Document],
        grid: &GridConfig,
        tokenizer: Arc<dyn Tokenizer>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Result<ChunkIndex, RetrievalError> {
        if docs.is_empty() {
            return Err(RetrievalError::NoDocuments);
        }
        grid.validate()?;
        let chunks = chunk_documents(docs, grid, tokenizer.as_ref());
        let counts: Vec<BTreeMap<String, usize>> = chunks
            .par_iter()
            .map(|c| {
                let mut m = BTreeMap::new();
                for t in terms(tokenizer.as_ref(), &c.text) {
                    *m.entry(t).or_insert(0) += 1;
                }
                m
            })
            .collect();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for m in &counts {
            for t in m.keys() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let vocabulary: BTreeMap<String, (u32, usize)> =
            df.into_iter().enumerate().map(|(i, (t, n))| (t, (i as u32, n))).collect();
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        let dense: Vec<Vec<f64>> = texts
            .par_chunks(256)
            .map(|batch| embedder.embed(batch))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        let mut index = ChunkIndex::from_data(
            IndexData {
                tokenizer: tokenizer.name().to_string(),
                embedder: embedder.id(),
                grid: grid.clone(),
                chunks,
                sparse: Vec::new(),
                dense,
                vocabulary,
            },
            tokenizer,
            embedder,
        );
        index.data.sparse = counts.par_iter().map(|m| index.weigh(m)).collect();
        Ok(index)
    }

    fn from_data(data: IndexData, tokenizer: Arc<dyn Tokenizer>, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        let n = data.chunks.len();
        let mut idfs = vec![0.0; data.vocabulary.len()];
        let mut term_ids = HashMap::with_capacity(data.vocabulary.len());
        for (t, &(id, df)) in &data.vocabulary {
            idfs[id as usize] = idf(n, df);
            term_ids.insert(t.clone(), id);
        }
        ChunkIndex {
            data,
            idf: idfs,
            term_ids,
            tokenizer,
            embedder,
        }
    }

    /// TF-IDF weights (raw counts) of known terms, L2-normalized.
    fn weigh(&self, counts: &BTreeMap<String, usize>) -> SparseVec {
        let mut v: SparseVec = counts
            .iter()
            .filter_map(|(t, &c)| self.term_ids.get(t).map(|&id| (id, c as f64 * self.idf[id as usize])))
            .collect();
        v.sort_by_key(|(id, _)| *id);
        let n = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|(_, w)| *w /= n);
        }
        v
    }

    pub fn sparse_vector(&self, text: &str) -> SparseVec {
        let mut m = BTreeMap::new();
        for t in terms(self.tokenizer.as_ref(), text) {
            *m.entry(t).or_insert(0) += 1;
        }
        self.weigh(&m)
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.data.chunks
    }

    pub fn chunk_sparse(&self, i: usize) -> &SparseVec {
        &self.data.sparse[i]
    }

    pub fn chunk_dense(&self, i: usize) -> &[f64] {
        &self.data.dense[i]
    }

    pub fn vocabulary_size(&self) -> usize {
        self.data.vocabulary.len()
    }

    pub fn document_frequency(&self, term: &str) -> Option<usize> {
        self.data.vocabulary.get(term).map(|&(_, df)| df)
    }

    pub fn dense_dimension(&self) -> usize {
        self.embedder.dimension()
    }

    /// Top `k` chunks by `(sparse cosine + dense cosine) / 2`, ties by
    /// chunk id.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Retrieved<'_>>, RetrievalError> {
        if query.trim().is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let qs = self.sparse_vector(query);
        let qd = self
            .embedder
            .embed(&[query])?
            .pop()
            .ok_or_else(|| EmbedError::Service("no vector for query".into()))?;
        let mut scored: Vec<Retrieved> = self
            .data
            .chunks
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let sparse = sparse_cosine(&qs, &self.data.sparse[i]);
                let dense = dense_cosine(&qd, &self.data.dense[i]);
                Retrieved {
                    chunk: c,
                    score: (sparse + dense) / 2.0,
                    sparse,
                    dense,
                }
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.chunk.chunk_id.cmp(&b.chunk.chunk_id)));
        scored.truncate(k);
        Ok(scored)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let err = |message: String| RetrievalError::Cache {
            path: path.display().to_string(),
            message,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
        }
        let tmp = path.with_extension("tmp");
        let f = std::fs::File::create(&tmp).map_err(|e| err(e.to_string()))?;
        ciborium::into_writer(&self.data, std::io::BufWriter::new(f)).map_err(|e| err(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| err(e.to_string()))
    }

    /// Loads a saved index; the tokenizer and embedder must match the ones
    /// it was built with.
    pub fn load(
        path: &Path,
        tokenizer: Arc<dyn Tokenizer>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Result<ChunkIndex, RetrievalError> {
        let err = |message: String| RetrievalError::Cache {
            path: path.display().to_string(),
            message,
        };
        let f = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
        let data: IndexData = ciborium::from_reader(std::io::BufReader::new(f)).map_err(|e| err(e.to_string()))?;
        if data.tokenizer != tokenizer.name() || data.embedder != embedder.id() {
            return Err(err("built with a different tokenizer or embedder".into()));
        }
        Ok(ChunkIndex::from_data(data, tokenizer, embedder))
    }

    /// Loads `dir/<key>.cbor` when present (and `rebuild` is false),
    /// otherwise builds and saves it.
    pub fn cached(
        dir: &Path,
        docs: &[Document],
        grid: &GridConfig,
        tokenizer: Arc<dyn Tokenizer>,
        embedder: Arc<dyn EmbeddingProvider>,
        rebuild: bool,
    ) -> Result<ChunkIndex, RetrievalError> {
        let key = cache_key(docs, grid, tokenizer.as_ref(), embedder.as_ref());
        let path = dir.join(format!("{key}.cbor"));
        if !rebuild && path.is_file() {
            match ChunkIndex::load(&path, tokenizer.clone(), embedder.clone()) {
                Ok(ix) => return Ok(ix),
                Err(e) => log::warn!("ignoring unreadable index cache: {e}"),
            }
        }
        let ix = ChunkIndex::build(docs, grid, tokenizer, embedder)?;
        ix.save(&path)?;
        Ok(ix)
    }
}

/// Index over documents with the default tokenizer and hashing embedder.
pub fn build_index(docs: &[Document], grid: &GridConfig) -> Result<ChunkIndex, RetrievalError> {
    ChunkIndex::build(docs, grid, Arc::new(WordTokenizer), Arc::new(HashingEmbedder::default()))
}

pub fn chunks_to_contexts(signal: &str, results: &[Retrieved<'_>]) -> Vec<ContextItem> {
    results
        .iter()
        .map(|r| {
            ContextItem::new(ContextType::Rag, signal, r.chunk.text.clone())
                .with_score(r.score)
                .with_provenance(format!(
                    "{} scale={} overlap={} offset={}",
                    r.chunk.doc_id, r.chunk.scale, r.chunk.overlap_ratio, r.chunk.token_start
                ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn stride_arithmetic() {
        let d = [Document::new("d", words(200), Source::Spec)];
        let g = GridConfig {
            scales: vec![100],
            overlaps: vec![0.2],
        };
        let starts: Vec<_> = chunk_documents(&d, &g, &WordTokenizer).iter().map(|c| c.token_start).collect();
        assert_eq!(starts, [0, 80, 160]);
        let d = [Document::new("d", words(50), Source::Spec)];
        let g = GridConfig {
            scales: vec![50],
            overlaps: vec![0.2, 0.4],
        };
        assert_eq!(chunk_documents(&d, &g, &WordTokenizer).len(), 2);
    }

    #[test]
    fn self_query_has_unit_sparse_cosine() {
        let docs = [
            Document::new("spec", "The tx_busy flag is set while a byte is shifted out. ".repeat(30), Source::Spec),
            Document::new("rtl", "assign tx_busy = state != IDLE;", Source::Rtl),
        ];
        let ix = build_index(&docs, &GridConfig::default()).unwrap();
        for (i, c) in ix.chunks().iter().enumerate() {
            assert_eq!(sparse_cosine(&ix.sparse_vector(&c.text), ix.chunk_sparse(i)), 1.0);
        }
        let r = ix.retrieve("tx_busy", 20).unwrap();
        assert!(r.len() <= 20);
        assert!(r.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(matches!(ix.retrieve("  ", 3), Err(RetrievalError::EmptyQuery)));
    }

    #[test]
    fn unseen_terms_give_zero_sparse() {
        let ix = build_index(&[Document::new("d", "alpha beta gamma", Source::Spec)], &GridConfig::default()).unwrap();
        let r = ix.retrieve("zeta", 100).unwrap();
        assert_eq!(r.len(), ix.chunks().len());
        assert!(r.iter().all(|x| x.sparse == 0.0));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let docs = [Document::new("d", words(120), Source::Spec)];
        let g = GridConfig::default();
        let tok: Arc<dyn Tokenizer> = Arc::new(WordTokenizer);
        let emb: Arc<dyn EmbeddingProvider> = Arc::new(HashingEmbedder::default());
        let a = ChunkIndex::cached(dir.path(), &docs, &g, tok.clone(), emb.clone(), false).unwrap();
        let b = ChunkIndex::cached(dir.path(), &docs, &g, tok, emb, false).unwrap();
        assert_eq!(a.data, b.data);
        let ra: Vec<_> = a.retrieve("w7 w8", 5).unwrap().iter().map(|r| (r.chunk.chunk_id.clone(), r.score)).collect();
        let rb: Vec<_> = b.retrieve("w7 w8", 5).unwrap().iter().map(|r| (r.chunk.chunk_id.clone(), r.score)).collect();
        assert_eq!(ra, rb);
    }

    #[test]
    fn contexts_preserve_order() {
        let ix = build_index(&[Document::new("d", words(300), Source::Spec)], &GridConfig::default()).unwrap();
        let r = ix.retrieve("w1", 20).unwrap();
        let c = chunks_to_contexts("w1", &r);
        assert_eq!(c.len(), 20);
        assert!(c.iter().zip(&r).all(|(c, r)| c.text == r.chunk.text && c.ctx_type == ContextType::Rag));
        assert!(chunks_to_contexts("x", &[]).is_empty());
    }
}
