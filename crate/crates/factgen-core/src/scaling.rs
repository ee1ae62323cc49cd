//! Dataset manifests and the carving of 1x/5x subsets out of a 10x parent.
//!
//! Carving is acceptance-order prefixes per section (token mode) or per fact
//! (fact mode), which makes the subsets deterministic and nested.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::qa::QAPair;
use crate::tokenize::TokenizerSpecInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Token,
    Fact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub mode: Mode,
    pub scale: u32,
    pub doc_id: String,
    pub tokenizer: TokenizerSpecInfo,
    /// Token mode only: the manually written seed pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_pair: Option<QAPair>,
}

/// Per-section accounting for token mode: cumulative accepted (question +
/// answer) token counts, one entry per accepted pair, in acceptance order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionTrace {
    pub section_index: usize,
    pub section_tokens: usize,
    pub cumulative: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub pairs: Vec<QAPair>,
    /// Question + answer token count per pair, aligned with `pairs`.
    pub pair_token_counts: Vec<usize>,
    pub total_qa_tokens: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_section: Vec<SectionTrace>,
    /// Fact mode: pairs per fact, in fact order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_fact: Vec<(String, usize)>,
    /// Digest of the 10x parent this manifest was carved from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_manifest: Option<String>,
}

impl DatasetManifest {
    pub fn question_set(&self) -> alloc::collections::BTreeSet<&str> {
        self.pairs.iter().map(|p| p.question.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingError {
    /// Parent must be a 10x manifest of the matching mode.
    BadParent,
}

impl fmt::Display for ScalingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingError::BadParent => write!(f, "parent manifest is not a 10x of the right mode"),
        }
    }
}

/// Token-mode stop rule: generation for a section stops at the first point
/// where the accepted token sum strictly exceeds scale * section_tokens.
pub fn token_stop_reached(cumulative_tokens: usize, scale: u32, section_tokens: usize) -> bool {
    cumulative_tokens > scale as usize * section_tokens
}

/// Carve a token-mode subset at `target` scale out of a 10x parent: for each
/// section independently, take pairs in acceptance order up to and including
/// the first pair whose cumulative token count exceeds target * section_tokens.
pub fn carve_subsets(
    parent: &DatasetManifest,
    target: u32,
    parent_digest: Option<String>,
) -> Result<DatasetManifest, ScalingError> {
    if parent.spec.mode != Mode::Token || parent.spec.scale != 10 || target >= parent.spec.scale {
        return Err(ScalingError::BadParent);
    }

    // per-section: how many leading pairs to keep
    let mut keep_per_section: alloc::collections::BTreeMap<usize, usize> =
        alloc::collections::BTreeMap::new();
    for trace in &parent.per_section {
        let mut keep = 0usize;
        for &cum in &trace.cumulative {
            keep += 1;
            if token_stop_reached(cum, target, trace.section_tokens) {
                break;
            }
        }
        keep_per_section.insert(trace.section_index, keep);
    }

    let mut taken: alloc::collections::BTreeMap<usize, usize> = alloc::collections::BTreeMap::new();
    let mut pairs = Vec::new();
    let mut pair_token_counts = Vec::new();
    for (pair, &tokens) in parent.pairs.iter().zip(&parent.pair_token_counts) {
        let section = pair.section_index.unwrap_or(0);
        let limit = *keep_per_section.get(&section).unwrap_or(&0);
        let count = taken.entry(section).or_insert(0);
        if *count < limit {
            *count += 1;
            pairs.push(pair.clone());
            pair_token_counts.push(tokens);
        }
    }

    let per_section = parent
        .per_section
        .iter()
        .map(|t| SectionTrace {
            section_index: t.section_index,
            section_tokens: t.section_tokens,
            cumulative: t.cumulative[..*keep_per_section.get(&t.section_index).unwrap_or(&0)]
                .to_vec(),
        })
        .collect();

    let total_qa_tokens = pair_token_counts.iter().sum();
    Ok(DatasetManifest {
        spec: DatasetSpec {
            scale: target,
            ..parent.spec.clone()
        },
        pairs,
        pair_token_counts,
        total_qa_tokens,
        per_section,
        per_fact: Vec::new(),
        parent_manifest: parent_digest,
    })
}

/// Carve a fact-mode subset: the first `target` pairs per fact in acceptance
/// order, clamped at the available count for underfilled facts.
pub fn carve_fact_subsets(
    parent: &DatasetManifest,
    target: u32,
    parent_digest: Option<String>,
) -> Result<DatasetManifest, ScalingError> {
    if parent.spec.mode != Mode::Fact || parent.spec.scale != 10 || target >= parent.spec.scale {
        return Err(ScalingError::BadParent);
    }
    let mut taken: alloc::collections::BTreeMap<&str, u32> = alloc::collections::BTreeMap::new();
    let mut pairs = Vec::new();
    let mut pair_token_counts = Vec::new();
    for (pair, &tokens) in parent.pairs.iter().zip(&parent.pair_token_counts) {
        let fact = pair.fact_id.as_deref().unwrap_or("");
        let count = taken.entry(fact).or_insert(0);
        if *count < target {
            *count += 1;
            pairs.push(pair.clone());
            pair_token_counts.push(tokens);
        }
    }
    let per_fact = parent
        .per_fact
        .iter()
        .map(|(id, n)| (id.clone(), (*n).min(target as usize)))
        .collect();
    let total_qa_tokens = pair_token_counts.iter().sum();
    Ok(DatasetManifest {
        spec: DatasetSpec {
            scale: target,
            ..parent.spec.clone()
        },
        pairs,
        pair_token_counts,
        total_qa_tokens,
        per_section: Vec::new(),
        per_fact,
        parent_manifest: parent_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::Origin;
    use alloc::string::ToString;
    use alloc::{format, vec};

    fn token_pair(section: usize, ordinal: usize) -> QAPair {
        QAPair {
            question: format!("q-{section}-{ordinal}"),
            answer: "a".to_string(),
            origin: Origin::TokenScale,
            section_index: Some(section),
            fact_id: None,
            generation_ordinal: ordinal,
        }
    }

    fn token_parent(traces: Vec<SectionTrace>) -> DatasetManifest {
        let mut pairs = Vec::new();
        let mut tokens = Vec::new();
        let mut ordinal = 0;
        for trace in &traces {
            let mut prev = 0;
            for &cum in &trace.cumulative {
                pairs.push(token_pair(trace.section_index, ordinal));
                tokens.push(cum - prev);
                prev = cum;
                ordinal += 1;
            }
        }
        let total = tokens.iter().sum();
        DatasetManifest {
            spec: DatasetSpec {
                mode: Mode::Token,
                scale: 10,
                doc_id: "doc".to_string(),
                tokenizer: TokenizerSpecInfo::whitespace(),
                seed_pair: None,
            },
            pairs,
            pair_token_counts: tokens,
            total_qa_tokens: total,
            per_section: traces,
            per_fact: vec![],
            parent_manifest: None,
        }
    }

    #[test]
    fn trace_walk_matches_thresholds() {
        // 100-token section, trace [300, 650, 980, 1010]
        let parent = token_parent(vec![SectionTrace {
            section_index: 0,
            section_tokens: 100,
            cumulative: vec![300, 650, 980, 1010],
        }]);
        assert_eq!(carve_subsets(&parent, 1, None).unwrap().pairs.len(), 1);
        assert_eq!(carve_subsets(&parent, 5, None).unwrap().pairs.len(), 2);
        assert_eq!(parent.pairs.len(), 4);
    }

    #[test]
    fn subsets_are_nested_prefixes() {
        let parent = token_parent(vec![
            SectionTrace {
                section_index: 0,
                section_tokens: 50,
                cumulative: vec![60, 130, 260, 390, 520],
            },
            SectionTrace {
                section_index: 3,
                section_tokens: 20,
                cumulative: vec![30, 90, 150, 210],
            },
        ]);
        let one = carve_subsets(&parent, 1, Some("digest10".to_string())).unwrap();
        let five = carve_subsets(&parent, 5, None).unwrap();
        let q1 = one.question_set();
        let q5 = five.question_set();
        let q10 = parent.question_set();
        assert!(q1.is_subset(&q5));
        assert!(q5.is_subset(&q10));
        assert_eq!(one.parent_manifest.as_deref(), Some("digest10"));
        assert_eq!(one.total_qa_tokens, one.pair_token_counts.iter().sum());
    }

    #[test]
    fn empty_parent_gives_empty_subsets() {
        let parent = token_parent(vec![]);
        let one = carve_subsets(&parent, 1, None).unwrap();
        assert!(one.pairs.is_empty());
        assert_eq!(one.total_qa_tokens, 0);
    }

    #[test]
    fn non_ten_x_parent_rejected() {
        let mut parent = token_parent(vec![]);
        parent.spec.scale = 5;
        assert_eq!(
            carve_subsets(&parent, 1, None),
            Err(ScalingError::BadParent)
        );
    }

    fn fact_parent(fact_counts: &[(&str, usize)]) -> DatasetManifest {
        let mut pairs = Vec::new();
        let mut tokens = Vec::new();
        for (fact, n) in fact_counts {
            for i in 0..*n {
                pairs.push(QAPair {
                    question: format!("q-{fact}-{i}"),
                    answer: "a".to_string(),
                    origin: Origin::FactScale,
                    section_index: None,
                    fact_id: Some((*fact).to_string()),
                    generation_ordinal: pairs.len(),
                });
                tokens.push(10);
            }
        }
        let total = tokens.iter().sum();
        DatasetManifest {
            spec: DatasetSpec {
                mode: Mode::Fact,
                scale: 10,
                doc_id: "doc".to_string(),
                tokenizer: TokenizerSpecInfo::whitespace(),
                seed_pair: None,
            },
            pairs,
            pair_token_counts: tokens,
            total_qa_tokens: total,
            per_section: vec![],
            per_fact: fact_counts
                .iter()
                .map(|(f, n)| (f.to_string(), *n))
                .collect(),
            parent_manifest: None,
        }
    }

    #[test]
    fn fact_subset_arithmetic() {
        let parent = fact_parent(&[("d:0:0", 10), ("d:0:1", 10), ("d:1:0", 10)]);
        assert_eq!(carve_fact_subsets(&parent, 1, None).unwrap().pairs.len(), 3);
        assert_eq!(
            carve_fact_subsets(&parent, 5, None).unwrap().pairs.len(),
            15
        );
        assert_eq!(parent.pairs.len(), 30);
    }

    #[test]
    fn underfilled_fact_clamps() {
        let parent = fact_parent(&[("d:0:0", 10), ("d:0:1", 4)]);
        let five = carve_fact_subsets(&parent, 5, None).unwrap();
        let from_underfilled = five
            .pairs
            .iter()
            .filter(|p| p.fact_id.as_deref() == Some("d:0:1"))
            .count();
        assert_eq!(from_underfilled, 4);
        assert_eq!(
            five.per_fact,
            vec![("d:0:0".to_string(), 5), ("d:0:1".to_string(), 4)]
        );
    }

    #[test]
    fn fact_subset_questions_contained_in_parent() {
        let parent = fact_parent(&[("d:0:0", 7), ("d:0:1", 10)]);
        let one = carve_fact_subsets(&parent, 1, None).unwrap();
        assert!(one.question_set().is_subset(&parent.question_set()));
        // every fact appears in every subset
        assert!(one.per_fact.iter().all(|(_, n)| *n >= 1));
    }
}
