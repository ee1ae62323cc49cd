//! Hybrid-retrieval baseline: index cleaned sections (BM25 term statistics
//! plus embeddings), retrieve with reciprocal-rank fusion, and answer with
//! retrieved context prepended to the question.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use factgen_core::clean::DocSection;
use factgen_core::coverage::{EmbeddingSet, SetKind};
use factgen_core::embed::EmbeddingVector;
use factgen_core::retrieval::{
    corpus_stats, hybrid_retrieve, term_stats, ChunkId, CorpusStats, RetrievalResult, TermStats,
};

use crate::coverage_io::{read_embedding_cache, write_embedding_cache, CoverageIoError};
use crate::gateway::{ChatRequest, Gateway, GatewayError, GenerationParams};
use crate::prompts;

pub const DEFAULT_RETRIEVAL_K: usize = 3;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("index has no chunks")]
    EmptyIndex,
    #[error("retrieval produced no results")]
    NoResults,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Cache(#[from] CoverageIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("index parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedChunk {
    pub chunk_id: ChunkId,
    pub text: String,
    pub term_stats: TermStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridIndex {
    pub chunks: Vec<IndexedChunk>,
    pub embeddings: Vec<EmbeddingVector>,
    pub corpus: CorpusStats,
    pub embed_model_id: String,
}

/// Embed and index one chunk per cleaned section. Embeddings go through the
/// gateway, so a warm replay cache issues zero live calls.
pub fn build_index(
    doc_id: &str,
    sections: &[DocSection],
    gateway: &Gateway,
) -> Result<HybridIndex, RagError> {
    if sections.is_empty() {
        return Err(RagError::EmptyIndex);
    }
    let mut chunks = Vec::new();
    let mut embeddings = Vec::new();
    for section in sections {
        chunks.push(IndexedChunk {
            chunk_id: (doc_id.to_string(), section.index),
            text: section.body.clone(),
            term_stats: term_stats(&section.body),
        });
        embeddings.push(gateway.embed(&section.body, "rag_index")?);
    }
    let corpus = corpus_stats(
        &chunks
            .iter()
            .map(|c| c.term_stats.clone())
            .collect::<Vec<_>>(),
    );
    Ok(HybridIndex {
        chunks,
        embeddings,
        corpus,
        embed_model_id: gateway.embed_model_id.clone(),
    })
}

/// Hybrid retrieval: cosine ranking of the query embedding, BM25 ranking of
/// the query text, RRF fusion, top-k.
pub fn retrieve(
    index: &HybridIndex,
    query: &str,
    k: usize,
    gateway: &Gateway,
) -> Result<Vec<RetrievalResult>, RagError> {
    if index.chunks.is_empty() {
        return Err(RagError::EmptyIndex);
    }
    let query_embedding = gateway.embed(query, "rag_query")?;
    let ids: Vec<ChunkId> = index.chunks.iter().map(|c| c.chunk_id.clone()).collect();
    let stats: Vec<TermStats> = index.chunks.iter().map(|c| c.term_stats.clone()).collect();
    Ok(hybrid_retrieve(
        &ids,
        &stats,
        &index.embeddings,
        &index.corpus,
        query,
        &query_embedding,
        k,
    ))
}

/// Render the answering prompt: retrieved section texts in rank order,
/// separated by blank lines, above the question.
pub fn build_context(index: &HybridIndex, results: &[RetrievalResult]) -> String {
    let mut context = String::new();
    for result in results {
        if let Some(chunk) = index.chunks.iter().find(|c| c.chunk_id == result.chunk_id) {
            if !context.is_empty() {
                context.push_str("\n\n");
            }
            context.push_str(&chunk.text);
        }
    }
    context
}

/// Answer a question with retrieved context under EVAL sampling.
pub fn answer_with_context(
    question: &str,
    index: &HybridIndex,
    results: &[RetrievalResult],
    theme: &str,
    gateway: &Gateway,
    model_id: &str,
) -> Result<String, RagError> {
    if results.is_empty() {
        return Err(RagError::NoResults);
    }
    let context = build_context(index, results);
    let request = ChatRequest {
        system: prompts::SYSTEM_SPORTING.to_string(),
        user: prompts::rag_answer_prompt(theme, &context, question),
        params: GenerationParams::eval(model_id),
        tag: "rag_answer".to_string(),
    };
    Ok(gateway.complete(&request)?.text)
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexStats {
    corpus: CorpusStats,
    embed_model_id: String,
}

/// Persist an index as a directory: chunks.jsonl + embeddings.bin + stats.json.
pub fn store_index(dir: &Path, index: &HybridIndex) -> Result<PathBuf, RagError> {
    std::fs::create_dir_all(dir)?;
    let mut jsonl = String::new();
    for chunk in &index.chunks {
        jsonl.push_str(&serde_json::to_string(chunk)?);
        jsonl.push('\n');
    }
    std::fs::write(dir.join("chunks.jsonl"), jsonl)?;
    let set = EmbeddingSet {
        items: index
            .chunks
            .iter()
            .zip(&index.embeddings)
            .map(|(c, e)| (format!("{}:{}", c.chunk_id.0, c.chunk_id.1), e.clone()))
            .collect(),
        kind: SetKind::Facts,
        embed_model_id: index.embed_model_id.clone(),
    };
    write_embedding_cache(&dir.join("embeddings.bin"), &set)?;
    let stats = IndexStats {
        corpus: index.corpus.clone(),
        embed_model_id: index.embed_model_id.clone(),
    };
    std::fs::write(dir.join("stats.json"), serde_json::to_vec_pretty(&stats)?)?;
    Ok(dir.to_path_buf())
}

pub fn load_index(dir: &Path) -> Result<HybridIndex, RagError> {
    let jsonl = std::fs::read_to_string(dir.join("chunks.jsonl"))?;
    let chunks: Vec<IndexedChunk> = jsonl
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let set = read_embedding_cache(&dir.join("embeddings.bin"))?;
    let embeddings = set.items.into_iter().map(|(_, v)| v).collect();
    let stats: IndexStats = serde_json::from_slice(&std::fs::read(dir.join("stats.json"))?)?;
    Ok(HybridIndex {
        chunks,
        embeddings,
        corpus: stats.corpus,
        embed_model_id: stats.embed_model_id,
    })
}
