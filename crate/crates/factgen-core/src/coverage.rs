//! Fact coverage: assign generated questions to atomic facts by cosine
//! similarity above a threshold, with multilabel assignment, and derive
//! coverage statistics and threshold sweeps.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_similarity, EmbeddingVector, SimilarityError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Facts,
    QaPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub items: Vec<(String, EmbeddingVector)>,
    pub kind: SetKind,
    pub embed_model_id: String,
}

impl EmbeddingSet {
    pub fn dim(&self) -> Option<usize> {
        self.items.first().map(|(_, v)| v.dim())
    }
}

/// One kept edge: a question whose similarity to a fact clears the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEdge {
    pub qa_id: String,
    pub fact_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    pub threshold: f64,
    pub edges: Vec<AssignmentEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub threshold: f64,
    pub fact_count: usize,
    pub covered_count: usize,
    pub uncovered_fraction: f64,
    /// In-degree per fact, in fact order.
    pub per_fact_question_counts: BTreeMap<String, usize>,
    pub max_questions_single_fact: usize,
    /// `histogram_bins[c]` = number of facts with exactly `c` questions.
    pub histogram_bins: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageError {
    DimMismatch,
    DegenerateVector,
}

impl fmt::Display for CoverageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverageError::DimMismatch => write!(f, "embedding sets have different dimensions"),
            CoverageError::DegenerateVector => write!(f, "zero-norm embedding in set"),
        }
    }
}

impl From<SimilarityError> for CoverageError {
    fn from(e: SimilarityError) -> Self {
        match e {
            SimilarityError::DimMismatch { .. } => CoverageError::DimMismatch,
            SimilarityError::DegenerateVector => CoverageError::DegenerateVector,
        }
    }
}

/// Exhaustive all-pairs assignment: edge (q, f) iff cosine(q, f) >= threshold.
/// A question may land on several facts.
pub fn assign_multilabel(
    qa: &EmbeddingSet,
    facts: &EmbeddingSet,
    threshold: f64,
) -> Result<AssignmentMatrix, CoverageError> {
    let mut edges = Vec::new();
    for (qa_id, qv) in &qa.items {
        for (fact_id, fv) in &facts.items {
            let sim = cosine_similarity(qv, fv)?;
            if sim >= threshold {
                edges.push(AssignmentEdge {
                    qa_id: qa_id.clone(),
                    fact_id: fact_id.clone(),
                    similarity: sim,
                });
            }
        }
    }
    Ok(AssignmentMatrix { threshold, edges })
}

/// Coverage statistics over `fact_ids` (a superset of the facts present in
/// the matrix, so zero-degree facts are counted as uncovered).
pub fn coverage_report(matrix: &AssignmentMatrix, fact_ids: &[String]) -> CoverageReport {
    let mut counts: BTreeMap<String, usize> = fact_ids.iter().map(|id| (id.clone(), 0)).collect();
    for edge in &matrix.edges {
        if let Some(c) = counts.get_mut(&edge.fact_id) {
            *c += 1;
        }
    }
    let fact_count = fact_ids.len();
    let covered_count = counts.values().filter(|&&c| c > 0).count();
    let max = counts.values().copied().max().unwrap_or(0);
    let mut bins = alloc::vec![0usize; max + 1];
    for &c in counts.values() {
        bins[c] += 1;
    }
    CoverageReport {
        threshold: matrix.threshold,
        fact_count,
        covered_count,
        uncovered_fraction: if fact_count == 0 {
            0.0
        } else {
            1.0 - covered_count as f64 / fact_count as f64
        },
        per_fact_question_counts: counts,
        max_questions_single_fact: max,
        histogram_bins: bins,
    }
}

/// One coverage report per threshold, ascending.
pub fn sweep_threshold(
    qa: &EmbeddingSet,
    facts: &EmbeddingSet,
    thresholds: &[f64],
    fact_ids: &[String],
) -> Result<Vec<CoverageReport>, CoverageError> {
    thresholds
        .iter()
        .map(|&t| Ok(coverage_report(&assign_multilabel(qa, facts, t)?, fact_ids)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::{format, vec};
    use proptest::prelude::*;

    fn set(kind: SetKind, vectors: &[(&str, &[f64])]) -> EmbeddingSet {
        EmbeddingSet {
            items: vectors
                .iter()
                .map(|(id, vals)| {
                    (
                        id.to_string(),
                        EmbeddingVector::new(vals.to_vec(), "test".to_string()),
                    )
                })
                .collect(),
            kind,
            embed_model_id: "test".to_string(),
        }
    }

    #[test]
    fn threshold_one_keeps_only_parallel_pairs() {
        let qa = set(
            SetKind::QaPairs,
            &[("q0", &[2.0, 0.0]), ("q1", &[1.0, 1.0])],
        );
        let facts = set(SetKind::Facts, &[("f0", &[1.0, 0.0]), ("f1", &[0.0, 1.0])]);
        let m = assign_multilabel(&qa, &facts, 1.0).unwrap();
        assert_eq!(m.edges.len(), 1);
        assert_eq!(m.edges[0].qa_id, "q0");
        assert_eq!(m.edges[0].fact_id, "f0");
    }

    #[test]
    fn low_threshold_is_complete_bipartite() {
        let qa = set(
            SetKind::QaPairs,
            &[("q0", &[1.0, 0.2]), ("q1", &[0.5, 1.0])],
        );
        let facts = set(SetKind::Facts, &[("f0", &[1.0, 0.1]), ("f1", &[0.3, 1.0])]);
        let m = assign_multilabel(&qa, &facts, -1.0).unwrap();
        assert_eq!(m.edges.len(), 4);
    }

    #[test]
    fn empty_matrix_means_everything_uncovered() {
        let m = AssignmentMatrix {
            threshold: 0.945,
            edges: vec![],
        };
        let ids: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
        let report = coverage_report(&m, &ids);
        assert_eq!(report.uncovered_fraction, 1.0);
        assert_eq!(report.covered_count, 0);
        assert_eq!(report.histogram_bins, vec![4]);
    }

    #[test]
    fn single_edge_per_fact_gives_full_coverage() {
        let edges = (0..3)
            .map(|i| AssignmentEdge {
                qa_id: format!("q{i}"),
                fact_id: format!("f{i}"),
                similarity: 0.99,
            })
            .collect();
        let m = AssignmentMatrix {
            threshold: 0.945,
            edges,
        };
        let ids: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let report = coverage_report(&m, &ids);
        assert_eq!(report.uncovered_fraction, 0.0);
        assert_eq!(report.max_questions_single_fact, 1);
        assert_eq!(report.histogram_bins, vec![0, 3]);
    }

    #[test]
    fn histogram_sums_to_fact_count() {
        let edges = vec![
            AssignmentEdge {
                qa_id: "q0".into(),
                fact_id: "f0".into(),
                similarity: 0.99,
            },
            AssignmentEdge {
                qa_id: "q1".into(),
                fact_id: "f0".into(),
                similarity: 0.97,
            },
        ];
        let m = AssignmentMatrix {
            threshold: 0.9,
            edges,
        };
        let ids = vec!["f0".to_string(), "f1".to_string(), "f2".to_string()];
        let report = coverage_report(&m, &ids);
        assert_eq!(
            report.histogram_bins.iter().sum::<usize>(),
            report.fact_count
        );
        assert_eq!(report.max_questions_single_fact, 2);
    }

    #[test]
    fn sweep_is_monotone_in_threshold() {
        let qa = set(
            SetKind::QaPairs,
            &[
                ("q0", &[1.0, 0.1, 0.0]),
                ("q1", &[0.2, 1.0, 0.1]),
                ("q2", &[0.0, 0.2, 1.0]),
            ],
        );
        let facts = set(
            SetKind::Facts,
            &[("f0", &[1.0, 0.0, 0.0]), ("f1", &[0.0, 1.0, 0.0])],
        );
        let ids = vec!["f0".to_string(), "f1".to_string()];
        let reports = sweep_threshold(&qa, &facts, &[0.0, 0.9, 0.945, 0.99, 1.0], &ids).unwrap();
        for pair in reports.windows(2) {
            assert!(pair[1].covered_count <= pair[0].covered_count);
        }
        assert_eq!(reports[0].uncovered_fraction, 0.0);
    }

    // Independent brute-force oracle: plain two-pass cosine, no shared code path
    // with assign_multilabel's iteration or the Kahan dot product.
    fn oracle_edges(
        qa: &EmbeddingSet,
        facts: &EmbeddingSet,
        threshold: f64,
    ) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (qid, q) in &qa.items {
            for (fid, f) in &facts.items {
                let dot: f64 = q.values.iter().zip(&f.values).map(|(a, b)| a * b).sum();
                let nq: f64 = q.values.iter().map(|a| a * a).sum::<f64>();
                let nf: f64 = f.values.iter().map(|a| a * a).sum::<f64>();
                let cos = dot / (libm::sqrt(nq) * libm::sqrt(nf));
                if cos >= threshold {
                    out.push((qid.clone(), fid.clone()));
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_brute_force_oracle(
            nq in 1usize..12,
            nf in 1usize..12,
            dim in 2usize..6,
            threshold in -1.0f64..1.0,
            seed in 0u64..u64::MAX,
        ) {
            // cheap deterministic vector filler
            let mut state = seed | 1;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0 + 0.001
            };
            let mk = |n: usize, kind: SetKind, prefix: &str, next: &mut dyn FnMut() -> f64| EmbeddingSet {
                items: (0..n)
                    .map(|i| {
                        (
                            format!("{prefix}{i}"),
                            EmbeddingVector::new((0..dim).map(|_| next()).collect(), "t".to_string()),
                        )
                    })
                    .collect(),
                kind,
                embed_model_id: "t".to_string(),
            };
            let qa = mk(nq, SetKind::QaPairs, "q", &mut next);
            let facts = mk(nf, SetKind::Facts, "f", &mut next);
            let got: Vec<(String, String)> = assign_multilabel(&qa, &facts, threshold)
                .unwrap()
                .edges
                .iter()
                .map(|e| (e.qa_id.clone(), e.fact_id.clone()))
                .collect();
            let want = oracle_edges(&qa, &facts, threshold);
            prop_assert_eq!(got, want);
        }
    }
}
