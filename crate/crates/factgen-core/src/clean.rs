//! Section cleaning: decide which raw article sections carry enough plain
//! text to be worth generating over.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// One section as fetched, before any filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSection {
    pub heading: String,
    pub body: String,
    pub index: usize,
}

/// A kept section. `token_count` is filled by the caller once a tokenizer
/// is in scope; cleaning itself never touches the body text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSection {
    pub heading: String,
    pub body: String,
    pub index: usize,
    pub token_count: usize,
}

/// Filtering knobs. Defaults drop blank sections and residual table
/// annotations while keeping ordinary prose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanPolicy {
    pub min_chars: usize,
    pub min_tokens: usize,
    pub drop_table_only: bool,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        Self {
            min_chars: 40,
            min_tokens: 10,
            drop_table_only: true,
        }
    }
}

/// Why a section was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    Blank,
    TooFewChars,
    TooFewTokens,
    TableResidue,
}

/// Per-section keep/drop decision, for the ingest log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDecision {
    pub index: usize,
    pub kept: bool,
    pub reason: Option<DropReason>,
}

/// Classify a single section body under `policy`. `None` means keep.
pub fn drop_reason(body: &str, policy: &CleanPolicy) -> Option<DropReason> {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Some(DropReason::Blank);
    }
    if trimmed.chars().count() < policy.min_chars {
        return Some(DropReason::TooFewChars);
    }
    if trimmed.split_whitespace().count() < policy.min_tokens {
        return Some(DropReason::TooFewTokens);
    }
    if policy.drop_table_only && looks_table_only(trimmed) {
        return Some(DropReason::TableResidue);
    }
    None
}

// Residual table annotations show up as many short label-like lines once the
// table markup itself is stripped. Heuristic: >= 80% of non-empty lines have
// fewer than 4 words.
fn looks_table_only(body: &str) -> bool {
    let mut total = 0usize;
    let mut short = 0usize;
    for line in body.lines() {
        let words = line.split_whitespace().count();
        if words == 0 {
            continue;
        }
        total += 1;
        if words < 4 {
            short += 1;
        }
    }
    total > 0 && short * 5 >= total * 4
}

/// Apply `policy` to `sections`, preserving order. Returns the kept sections
/// (token counts left at 0 for the caller to fill) plus the full decision log.
pub fn clean_sections(
    sections: &[RawSection],
    policy: &CleanPolicy,
) -> (Vec<DocSection>, Vec<CleanDecision>) {
    let mut kept = Vec::new();
    let mut log = Vec::new();
    for section in sections {
        match drop_reason(&section.body, policy) {
            Some(reason) => log.push(CleanDecision {
                index: section.index,
                kept: false,
                reason: Some(reason),
            }),
            None => {
                log.push(CleanDecision {
                    index: section.index,
                    kept: true,
                    reason: None,
                });
                kept.push(DocSection {
                    heading: section.heading.clone(),
                    body: section.body.clone(),
                    index: section.index,
                    token_count: 0,
                });
            }
        }
    }
    (kept, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn raw(index: usize, body: &str) -> RawSection {
        RawSection {
            heading: alloc::format!("S{index}"),
            body: body.to_string(),
            index,
        }
    }

    const PROSE: &str = "The final was played in front of a record crowd and the \
                         hosts won by a comfortable margin after a strong second half.";

    #[test]
    fn blank_sections_drop() {
        let sections = vec![raw(0, "   \n\t  "), raw(1, PROSE)];
        let (kept, log) = clean_sections(&sections, &CleanPolicy::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].index, 1);
        assert_eq!(log[0].reason, Some(DropReason::Blank));
        assert!(log[1].kept);
    }

    #[test]
    fn all_blank_yields_empty_list() {
        let sections = vec![raw(0, ""), raw(1, " \n ")];
        let (kept, _) = clean_sections(&sections, &CleanPolicy::default());
        assert!(kept.is_empty());
    }

    #[test]
    fn table_residue_drops() {
        let body = "Team A\nTeam B\nTeam C\n3rd place\nWinner\nRunner-up\n\
                    Score 4-2\nVenue North\nVenue South\nAttendance high";
        assert_eq!(
            drop_reason(body, &CleanPolicy::default()),
            Some(DropReason::TableResidue)
        );
    }

    #[test]
    fn prose_survives_table_heuristic() {
        assert_eq!(drop_reason(PROSE, &CleanPolicy::default()), None);
    }

    #[test]
    fn permissive_policy_drops_only_whitespace() {
        let policy = CleanPolicy {
            min_chars: 0,
            min_tokens: 0,
            drop_table_only: false,
        };
        assert_eq!(drop_reason("x", &policy), None);
        assert_eq!(drop_reason("a\nb\nc", &policy), None);
        assert_eq!(drop_reason("  \n ", &policy), Some(DropReason::Blank));
    }

    #[test]
    fn cleaning_is_idempotent_and_preserves_bodies() {
        let sections = vec![raw(0, ""), raw(1, PROSE), raw(2, "too short")];
        let policy = CleanPolicy::default();
        let (kept, _) = clean_sections(&sections, &policy);
        let as_raw: Vec<RawSection> = kept
            .iter()
            .map(|s| RawSection {
                heading: s.heading.clone(),
                body: s.body.clone(),
                index: s.index,
            })
            .collect();
        let (kept2, _) = clean_sections(&as_raw, &policy);
        assert_eq!(kept, kept2);
        assert_eq!(kept[0].body, PROSE);
    }
}
