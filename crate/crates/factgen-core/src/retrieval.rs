//! Hybrid retrieval scoring: BM25 keyword ranking, cosine vector ranking,
//! and reciprocal-rank fusion over the two.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_similarity, EmbeddingVector};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const RRF_K: f64 = 60.0;

/// (doc_id, section_index) — one chunk per cleaned section.
pub type ChunkId = (String, usize);

/// Lowercased term frequencies for one chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermStats {
    pub counts: BTreeMap<String, usize>,
    pub len: usize,
}

/// Corpus-level statistics BM25 needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_freq: BTreeMap<String, usize>,
    pub doc_count: usize,
    pub avg_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: ChunkId,
    pub vector_rank: usize,
    pub keyword_rank: usize,
    pub fused_score: f64,
    pub rank: usize,
}

/// Lowercase and split on non-alphanumeric characters.
pub fn tokenize_terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

pub fn term_stats(text: &str) -> TermStats {
    let terms = tokenize_terms(text);
    let len = terms.len();
    let mut counts = BTreeMap::new();
    for t in terms {
        *counts.entry(t).or_insert(0usize) += 1;
    }
    TermStats { counts, len }
}

/// Recompute corpus statistics from a chunk set.
pub fn corpus_stats(chunks: &[TermStats]) -> CorpusStats {
    let mut doc_freq = BTreeMap::new();
    let mut total_len = 0usize;
    for chunk in chunks {
        total_len += chunk.len;
        for term in chunk.counts.keys() {
            *doc_freq.entry(term.clone()).or_insert(0usize) += 1;
        }
    }
    let doc_count = chunks.len();
    CorpusStats {
        doc_freq,
        doc_count,
        avg_len: if doc_count == 0 {
            0.0
        } else {
            total_len as f64 / doc_count as f64
        },
    }
}

/// Okapi BM25 with the +1-inside-log idf variant, k1 = 1.2, b = 0.75.
pub fn bm25_score(query_terms: &[String], chunk: &TermStats, corpus: &CorpusStats) -> f64 {
    let mut score = 0.0;
    for term in query_terms {
        let tf = *chunk.counts.get(term).unwrap_or(&0) as f64;
        if tf == 0.0 {
            continue;
        }
        let df = *corpus.doc_freq.get(term).unwrap_or(&0) as f64;
        let n = corpus.doc_count as f64;
        let idf = libm::log((n - df + 0.5) / (df + 0.5) + 1.0);
        let norm = 1.0 - BM25_B + BM25_B * chunk.len as f64 / corpus.avg_len;
        score += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
    }
    score
}

/// Rank chunk ids by score descending, ties broken by chunk id ascending.
/// Returned map is chunk id -> 1-based rank.
pub fn rank_by_score(scores: &[(ChunkId, f64)]) -> BTreeMap<ChunkId, usize> {
    let mut ordered: Vec<&(ChunkId, f64)> = scores.iter().collect();
    ordered.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ordered
        .into_iter()
        .enumerate()
        .map(|(i, (id, _))| (id.clone(), i + 1))
        .collect()
}

/// Reciprocal-rank fusion over the vector and keyword rankings, top-k.
/// fused_score = sum over rankings of 1 / (60 + rank).
pub fn fuse_rankings(
    vector_ranks: &BTreeMap<ChunkId, usize>,
    keyword_ranks: &BTreeMap<ChunkId, usize>,
    k: usize,
) -> Vec<RetrievalResult> {
    let mut fused: Vec<RetrievalResult> = vector_ranks
        .iter()
        .map(|(id, &vr)| {
            let kr = *keyword_ranks.get(id).unwrap_or(&vector_ranks.len());
            RetrievalResult {
                chunk_id: id.clone(),
                vector_rank: vr,
                keyword_rank: kr,
                fused_score: 1.0 / (RRF_K + vr as f64) + 1.0 / (RRF_K + kr as f64),
                rank: 0,
            }
        })
        .collect();
    fused.sort_by(|a, b| {
        b.fused_score
            .partial_cmp(&a.fused_score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    fused.truncate(k);
    for (i, r) in fused.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    fused
}

/// Full hybrid retrieval over in-memory chunks: cosine ranking of
/// `query_embedding` against `embeddings`, BM25 ranking of `query_text`
/// against `chunks`, fused with RRF.
pub fn hybrid_retrieve(
    ids: &[ChunkId],
    chunks: &[TermStats],
    embeddings: &[EmbeddingVector],
    corpus: &CorpusStats,
    query_text: &str,
    query_embedding: &EmbeddingVector,
    k: usize,
) -> Vec<RetrievalResult> {
    let query_terms = tokenize_terms(query_text);
    let keyword_scores: Vec<(ChunkId, f64)> = ids
        .iter()
        .zip(chunks)
        .map(|(id, c)| (id.clone(), bm25_score(&query_terms, c, corpus)))
        .collect();
    let vector_scores: Vec<(ChunkId, f64)> = ids
        .iter()
        .zip(embeddings)
        .map(|(id, e)| {
            let sim = cosine_similarity(query_embedding, e).unwrap_or(-1.0);
            (id.clone(), sim)
        })
        .collect();
    fuse_rankings(
        &rank_by_score(&vector_scores),
        &rank_by_score(&keyword_scores),
        k,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn tokenizer_lowercases_and_strips_punctuation() {
        assert_eq!(
            tokenize_terms("The Final, 2023: India vs. Australia!"),
            vec!["the", "final", "2023", "india", "vs", "australia"]
        );
    }

    #[test]
    fn bm25_prefers_matching_chunk() {
        let a = term_stats("cricket cricket final india");
        let b = term_stats("golf major championship winner");
        let corpus = corpus_stats(&[a.clone(), b.clone()]);
        let q = tokenize_terms("cricket final");
        assert!(bm25_score(&q, &a, &corpus) > bm25_score(&q, &b, &corpus));
        assert_eq!(bm25_score(&q, &b, &corpus), 0.0);
    }

    #[test]
    fn bm25_matches_hand_computation() {
        // Two chunks, query "india". tf=2 in chunk 0 (len 4), absent in chunk 1 (len 2).
        let c0 = term_stats("india india won final");
        let c1 = term_stats("golf major");
        let corpus = corpus_stats(&[c0.clone(), c1.clone()]);
        // df=1, N=2 -> idf = ln((2-1+0.5)/(1+0.5)+1) = ln(2)
        // avg_len=3, norm = 0.25 + 0.75*4/3 = 1.25
        // score = ln2 * 2*2.2/(2+1.2*1.25) = ln2 * 4.4/3.5
        let want = core::f64::consts::LN_2 * 4.4 / 3.5;
        let got = bm25_score(&tokenize_terms("india"), &c0, &corpus);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn rank_ties_break_lexicographically() {
        let id = |s: &str| (s.to_string(), 0usize);
        let ranks = rank_by_score(&[(id("b"), 1.0), (id("a"), 1.0), (id("c"), 2.0)]);
        assert_eq!(ranks[&id("c")], 1);
        assert_eq!(ranks[&id("a")], 2);
        assert_eq!(ranks[&id("b")], 3);
    }

    #[test]
    fn rrf_depends_only_on_ranks() {
        // Rescaling raw scores monotonically must not change fusion output.
        let id = |s: &str| (s.to_string(), 0usize);
        let raw = vec![(id("a"), 0.9), (id("b"), 0.5), (id("c"), 0.1)];
        let rescaled: Vec<(ChunkId, f64)> = raw
            .iter()
            .map(|(i, s)| (i.clone(), s * 1000.0 + 7.0))
            .collect();
        let kw = rank_by_score(&vec![(id("a"), 3.0), (id("b"), 9.0), (id("c"), 1.0)]);
        let fused_a = fuse_rankings(&rank_by_score(&raw), &kw, 3);
        let fused_b = fuse_rankings(&rank_by_score(&rescaled), &kw, 3);
        assert_eq!(fused_a, fused_b);
    }

    #[test]
    fn fusion_scores_are_rrf_sums() {
        let id = |s: &str| (s.to_string(), 0usize);
        let vr = rank_by_score(&[(id("a"), 2.0), (id("b"), 1.0)]);
        let kr = rank_by_score(&[(id("a"), 1.0), (id("b"), 2.0)]);
        let fused = fuse_rankings(&vr, &kr, 2);
        // both chunks score 1/61 + 1/62; tie broken by id
        let want = 1.0 / 61.0 + 1.0 / 62.0;
        assert!((fused[0].fused_score - want).abs() < 1e-15);
        assert_eq!(fused[0].chunk_id, id("a"));
        assert_eq!(fused[1].chunk_id, id("b"));
    }

    #[test]
    fn k_clamps_to_chunk_count() {
        let id = |s: &str| (s.to_string(), 0usize);
        let vr = rank_by_score(&[(id("a"), 2.0), (id("b"), 1.0)]);
        let kr = vr.clone();
        assert_eq!(fuse_rankings(&vr, &kr, 10).len(), 2);
    }
}
