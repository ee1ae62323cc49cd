//! Question-answer pairs, the exact-match question bank, atomic facts, and
//! the tolerant parser for numbered-list completions.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Which pipeline stage produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    TokenScale,
    FactScale,
    Seed,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    pub origin: Origin,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact_id: Option<String>,
    /// Order accepted into the bank, per document.
    #[serde(rename = "ordinal")]
    pub generation_ordinal: usize,
}

/// Registry of every accepted pair for a document. Questions are unique on
/// exact string match; insertion order is preserved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    entries: Vec<QAPair>,
    #[serde(skip)]
    questions: BTreeSet<String>,
}

impl QuestionBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a pair unless its question text is already present.
    /// Returns whether the pair was accepted.
    pub fn insert(&mut self, mut pair: QAPair) -> bool {
        if self.questions.contains(&pair.question) {
            return false;
        }
        pair.generation_ordinal = self.entries.len();
        self.questions.insert(pair.question.clone());
        self.entries.push(pair);
        true
    }

    pub fn contains_question(&self, question: &str) -> bool {
        self.questions.contains(question)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QAPair] {
        &self.entries
    }

    /// Rebuild the question index after deserialization.
    pub fn reindex(&mut self) {
        self.questions = self.entries.iter().map(|p| p.question.clone()).collect();
    }
}

/// Triage status of a distilled fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactStatus {
    Accepted,
    /// The generator elected to skip; awaiting a manual filter/regenerate call.
    SkippedRelated,
    FilteredUnrelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicFact {
    pub fact_id: String,
    pub text: String,
    pub section_index: usize,
    pub status: FactStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triage_note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseError {
    /// No well-formed pair (or fact) could be extracted from the completion.
    EmptyGeneration,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::EmptyGeneration => write!(f, "completion contained no parsable items"),
        }
    }
}

/// Strip a leading "12." / "12)" enumeration marker, if any.
fn strip_enumeration(line: &str) -> &str {
    let trimmed = line.trim_start();
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return trimmed;
    }
    let rest = &trimmed[digits..];
    if let Some(stripped) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
        stripped.trim_start()
    } else {
        trimmed
    }
}

/// Parse a completion continuing a numbered "N. Q: ... A: ..." list.
///
/// Tolerates restarted numbering, multi-line answers, and "Q:"/"A:" on the
/// same or separate lines. A trailing pair missing its answer is dropped.
pub fn parse_qa_list(raw: &str) -> Result<Vec<(String, String)>, ParseError> {
    enum State {
        Idle,
        InQuestion(String),
        InAnswer(String, String),
    }

    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut state = State::Idle;

    let finish = |state: &mut State, pairs: &mut Vec<(String, String)>| {
        if let State::InAnswer(q, a) = core::mem::replace(state, State::Idle) {
            let q = q.trim().to_string();
            let a = a.trim().to_string();
            if !q.is_empty() && !a.is_empty() {
                pairs.push((q, a));
            }
        }
    };

    for line in raw.lines() {
        let mut rest = strip_enumeration(line);
        loop {
            if let Some(after_q) = rest.strip_prefix("Q:") {
                finish(&mut state, &mut pairs);
                // the answer may sit on the same line
                if let Some(split) = after_q.find(" A:") {
                    let question = after_q[..split].trim().to_string();
                    state = State::InAnswer(question, String::new());
                    rest = after_q[split + 1..].trim_start();
                    continue;
                }
                state = State::InQuestion(after_q.trim().to_string());
            } else if let Some(after_a) = rest.strip_prefix("A:") {
                match core::mem::replace(&mut state, State::Idle) {
                    State::InQuestion(q) => state = State::InAnswer(q, after_a.trim().to_string()),
                    State::InAnswer(q, a) => {
                        // stray second "A:"; keep appending to the answer
                        let mut a = a;
                        if !a.is_empty() {
                            a.push(' ');
                        }
                        a.push_str(after_a.trim());
                        state = State::InAnswer(q, a);
                    }
                    State::Idle => {}
                }
            } else {
                let text = rest.trim();
                if !text.is_empty() {
                    match &mut state {
                        State::InQuestion(q) => {
                            if !q.is_empty() {
                                q.push(' ');
                            }
                            q.push_str(text);
                        }
                        State::InAnswer(_, a) => {
                            if !a.is_empty() {
                                a.push(' ');
                            }
                            a.push_str(text);
                        }
                        State::Idle => {}
                    }
                }
            }
            break;
        }
    }
    finish(&mut state, &mut pairs);

    if pairs.is_empty() {
        Err(ParseError::EmptyGeneration)
    } else {
        Ok(pairs)
    }
}

/// Parse a numbered list of atomic fact statements, one per line.
/// Exact-duplicate lines are dropped.
pub fn parse_fact_list(raw: &str) -> Result<Vec<String>, ParseError> {
    let mut seen = BTreeSet::new();
    let mut facts = Vec::new();
    for line in raw.lines() {
        let text = strip_enumeration(line).trim();
        if text.is_empty() || text.eq_ignore_ascii_case("skip") {
            continue;
        }
        if seen.insert(text.to_string()) {
            facts.push(text.to_string());
        }
    }
    if facts.is_empty() {
        Err(ParseError::EmptyGeneration)
    } else {
        Ok(facts)
    }
}

/// True when a fact-generation completion is the SKIP outcome.
pub fn is_skip_reply(raw: &str) -> bool {
    let trimmed = raw.trim();
    trimmed.eq_ignore_ascii_case("skip") || strip_enumeration(trimmed).eq_ignore_ascii_case("skip")
}
