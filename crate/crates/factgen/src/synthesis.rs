//! Dataset synthesis drivers: the per-section token-scaling loop, atomic
//! fact extraction, per-fact generation with skip triage, evaluation-set
//! construction, fine-tune export, and manifest persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use factgen_core::clean::DocSection;
use factgen_core::qa::{
    is_skip_reply, parse_fact_list, parse_qa_list, AtomicFact, FactStatus, Origin, QAPair,
    QuestionBank,
};
use factgen_core::scaling::{
    carve_fact_subsets, carve_subsets, token_stop_reached, DatasetManifest, DatasetSpec, Mode,
    ScalingError, SectionTrace,
};
use factgen_core::tokenize::{Tokenizer, TokenizerSpecInfo};

use crate::gateway::{ChatRequest, Gateway, GatewayError, GenerationParams};
use crate::prompts;

/// Consecutive fruitless generation calls tolerated before stalling.
pub const MAX_FRUITLESS_ATTEMPTS: u32 = 20;
/// Unique pairs required per fact in the 10x fact-mode dataset.
pub const PAIRS_PER_FACT: usize = 10;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("generation stalled on section {section_index} after {attempts} fruitless calls ({accepted} pairs accepted)")]
    Stalled {
        section_index: usize,
        attempts: u32,
        accepted: usize,
        /// Pairs obtained before the stall, with their token counts.
        partial: Vec<(QAPair, usize)>,
    },
    #[error(
        "fact extraction produced nothing for section {0} after {MAX_FRUITLESS_ATTEMPTS} attempts"
    )]
    ExtractionStalled(usize),
    #[error("skipped fact {0} has no triage decision")]
    TriageIncomplete(String),
    #[error("token mode requires a seed pair")]
    MissingSeedPair,
    #[error(transparent)]
    Scaling(#[from] ScalingErrorWrapper),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// ScalingError is a core type without std::error; wrap it once here.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ScalingErrorWrapper(pub ScalingError);

impl From<ScalingError> for SynthesisError {
    fn from(e: ScalingError) -> Self {
        SynthesisError::Scaling(ScalingErrorWrapper(e))
    }
}

/// Outcome of the token-scaling loop for one section.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionOutcome {
    pub pairs: Vec<QAPair>,
    pub pair_tokens: Vec<usize>,
    pub trace: SectionTrace,
}

fn pair_tokens(tokenizer: &Tokenizer, question: &str, answer: &str) -> usize {
    tokenizer.count(question) + tokenizer.count(answer)
}

/// Generate pairs for one section until the accepted (question + answer)
/// token sum strictly exceeds `scale` times the section's token count.
///
/// `initial` is a pre-accepted pair (the manual seed) whose tokens count
/// toward the threshold; the caller has already inserted it into the bank.
#[allow(clippy::too_many_arguments)]
pub fn token_scale_section(
    section: &DocSection,
    scale: u32,
    bank: &mut QuestionBank,
    theme: &str,
    seed_question: &str,
    seed_answer: &str,
    initial: Option<QAPair>,
    origin: Origin,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
    params: &GenerationParams,
    tag: &str,
) -> Result<SectionOutcome, SynthesisError> {
    let mut pairs: Vec<QAPair> = Vec::new();
    let mut tokens: Vec<usize> = Vec::new();
    let mut cumulative: Vec<usize> = Vec::new();
    let mut total = 0usize;

    let accept = |pair: QAPair,
                  pairs: &mut Vec<QAPair>,
                  tokens: &mut Vec<usize>,
                  cumulative: &mut Vec<usize>,
                  total: &mut usize,
                  tokenizer: &Tokenizer| {
        let t = pair_tokens(tokenizer, &pair.question, &pair.answer);
        *total += t;
        pairs.push(pair);
        tokens.push(t);
        cumulative.push(*total);
    };

    if let Some(seed) = initial {
        accept(
            seed,
            &mut pairs,
            &mut tokens,
            &mut cumulative,
            &mut total,
            tokenizer,
        );
    }

    let user = prompts::token_gen_prompt(theme, &section.body, seed_question, seed_answer);
    let request = ChatRequest {
        system: prompts::SYSTEM_SPORTING.to_string(),
        user,
        params: params.clone(),
        tag: tag.to_string(),
    };

    let mut attempt: u32 = 0;
    let mut fruitless: u32 = 0;
    while !token_stop_reached(total, scale, section.token_count) {
        if fruitless >= MAX_FRUITLESS_ATTEMPTS {
            return Err(SynthesisError::Stalled {
                section_index: section.index,
                attempts: fruitless,
                accepted: pairs.len(),
                partial: pairs.into_iter().zip(tokens).collect(),
            });
        }
        let response = gateway.complete_attempt(&request, attempt)?;
        attempt += 1;
        let parsed = match parse_qa_list(&response.text) {
            Ok(p) => p,
            Err(_) => {
                fruitless += 1;
                continue;
            }
        };
        let mut accepted_this_call = 0usize;
        for (question, answer) in parsed {
            let candidate = QAPair {
                question,
                answer,
                origin,
                section_index: Some(section.index),
                fact_id: None,
                generation_ordinal: 0,
            };
            let key = candidate.question.clone();
            if bank.insert(candidate.clone()) {
                accepted_this_call += 1;
                accept(
                    candidate,
                    &mut pairs,
                    &mut tokens,
                    &mut cumulative,
                    &mut total,
                    tokenizer,
                );
                if token_stop_reached(total, scale, section.token_count) {
                    break;
                }
            } else {
                debug_assert!(bank.contains_question(&key));
            }
        }
        if accepted_this_call == 0 {
            fruitless += 1;
        } else {
            fruitless = 0;
        }
    }

    Ok(SectionOutcome {
        pairs,
        pair_tokens: tokens,
        trace: SectionTrace {
            section_index: section.index,
            section_tokens: section.token_count,
            cumulative,
        },
    })
}

/// Build the 10x token-mode dataset for one document. The seed pair is
/// inserted first and its tokens count toward its section's threshold.
pub fn build_token_dataset(
    doc_id: &str,
    sections: &[DocSection],
    seed_pair: &QAPair,
    theme: &str,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
    spec_info: TokenizerSpecInfo,
    scale: u32,
    model_id: &str,
) -> Result<(DatasetManifest, QuestionBank), SynthesisError> {
    let mut bank = QuestionBank::new();
    let mut seed = seed_pair.clone();
    seed.origin = Origin::Seed;
    if seed.section_index.is_none() {
        seed.section_index = sections.first().map(|s| s.index);
    }
    bank.insert(seed.clone());

    let params = GenerationParams::gen(model_id);
    let mut pairs = Vec::new();
    let mut pair_token_counts = Vec::new();
    let mut per_section = Vec::new();
    for section in sections {
        let initial = if seed.section_index == Some(section.index) {
            Some(seed.clone())
        } else {
            None
        };
        let outcome = token_scale_section(
            section,
            scale,
            &mut bank,
            theme,
            &seed_pair.question,
            &seed_pair.answer,
            initial,
            Origin::TokenScale,
            gateway,
            tokenizer,
            &params,
            "token_scale",
        )?;
        pairs.extend(outcome.pairs);
        pair_token_counts.extend(outcome.pair_tokens);
        per_section.push(outcome.trace);
    }
    let total_qa_tokens = pair_token_counts.iter().sum();
    let manifest = DatasetManifest {
        spec: DatasetSpec {
            mode: Mode::Token,
            scale,
            doc_id: doc_id.to_string(),
            tokenizer: spec_info,
            seed_pair: Some(seed),
        },
        pairs,
        pair_token_counts,
        total_qa_tokens,
        per_section,
        per_fact: Vec::new(),
        parent_manifest: None,
    };
    Ok((manifest, bank))
}

/// Carve the 1x and 5x token-mode subsets from a 10x parent.
pub fn carve_token_subsets(
    parent: &DatasetManifest,
    parent_digest: &str,
) -> Result<(DatasetManifest, DatasetManifest), SynthesisError> {
    let one = carve_subsets(parent, 1, Some(parent_digest.to_string()))?;
    let five = carve_subsets(parent, 5, Some(parent_digest.to_string()))?;
    Ok((one, five))
}

/// Extract atomic facts from one cleaned section. Fact texts are exact-match
/// deduplicated document-wide via `seen`; ids are "<doc_id>:<section>:<ordinal>".
pub fn extract_atomic_facts(
    doc_id: &str,
    section: &DocSection,
    theme: &str,
    gateway: &Gateway,
    model_id: &str,
    seen: &mut BTreeSet<String>,
) -> Result<Vec<AtomicFact>, SynthesisError> {
    let request = ChatRequest {
        system: prompts::SYSTEM_SPORTING.to_string(),
        user: prompts::fact_extract_prompt(theme, &section.body),
        params: GenerationParams::gen(model_id),
        tag: "fact_extract".to_string(),
    };
    for attempt in 0..MAX_FRUITLESS_ATTEMPTS {
        let response = gateway.complete_attempt(&request, attempt)?;
        if let Ok(texts) = parse_fact_list(&response.text) {
            let mut facts = Vec::new();
            let mut ordinal = 0usize;
            for text in texts {
                if !seen.insert(text.clone()) {
                    continue;
                }
                facts.push(AtomicFact {
                    fact_id: format!("{doc_id}:{}:{ordinal}", section.index),
                    text,
                    section_index: section.index,
                    status: FactStatus::Accepted,
                    triage_note: None,
                });
                ordinal += 1;
            }
            return Ok(facts);
        }
    }
    Err(SynthesisError::ExtractionStalled(section.index))
}

/// Result of generating pairs for one fact.
#[derive(Debug, Clone, PartialEq)]
pub enum FactGenOutcome {
    /// The generator elected to skip the fact.
    Skip,
    Pairs {
        pairs: Vec<QAPair>,
        /// Fewer than the desired 10 unique pairs could be obtained.
        underfilled: bool,
    },
}

/// Generate up to 10 bank-unique pairs for one fact, re-querying with a
/// fresh attempt index when questions collide with the bank.
pub fn fact_generate(
    fact: &AtomicFact,
    target_pairs: usize,
    bank: &mut QuestionBank,
    theme: &str,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
    model_id: &str,
    allow_skip: bool,
) -> Result<FactGenOutcome, SynthesisError> {
    let tag = if allow_skip {
        "fact_gen_skip"
    } else {
        "fact_gen_noskip"
    };
    let request = ChatRequest {
        system: prompts::SYSTEM_SPORTING.to_string(),
        user: prompts::fact_gen_prompt(theme, &fact.text, allow_skip),
        params: GenerationParams::gen(model_id),
        tag: tag.to_string(),
    };
    let mut pairs: Vec<QAPair> = Vec::new();
    let mut fruitless = 0u32;
    let mut attempt = 0u32;
    while pairs.len() < target_pairs && fruitless < MAX_FRUITLESS_ATTEMPTS {
        let response = gateway.complete_attempt(&request, attempt)?;
        attempt += 1;
        if allow_skip && is_skip_reply(&response.text) {
            return Ok(FactGenOutcome::Skip);
        }
        let parsed = match parse_qa_list(&response.text) {
            Ok(p) => p,
            Err(_) => {
                fruitless += 1;
                continue;
            }
        };
        let mut accepted_this_call = 0usize;
        for (question, answer) in parsed {
            if pairs.len() >= target_pairs {
                break;
            }
            let candidate = QAPair {
                question,
                answer,
                origin: Origin::FactScale,
                section_index: Some(fact.section_index),
                fact_id: Some(fact.fact_id.clone()),
                generation_ordinal: 0,
            };
            if bank.insert(candidate.clone()) {
                accepted_this_call += 1;
                pairs.push(candidate);
            }
        }
        if accepted_this_call == 0 {
            fruitless += 1;
        } else {
            fruitless = 0;
        }
    }
    let underfilled = pairs.len() < target_pairs;
    let _ = tokenizer; // token accounting happens at manifest assembly
    Ok(FactGenOutcome::Pairs { pairs, underfilled })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageDecision {
    Filter,
    Regenerate,
}

/// Parse a triage decisions file: lines of "<fact_id> <filter|regenerate>".
pub fn parse_decisions(text: &str) -> BTreeMap<String, TriageDecision> {
    let mut decisions = BTreeMap::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        if let (Some(id), Some(verdict)) = (parts.next(), parts.next()) {
            let decision = match verdict {
                "filter" => TriageDecision::Filter,
                "regenerate" => TriageDecision::Regenerate,
                _ => continue,
            };
            decisions.insert(id.to_string(), decision);
        }
    }
    decisions
}

/// Resolve skipped facts: filtered facts leave the pipeline, regenerated
/// facts get pairs via the no-skip prompt and become accepted. Every skipped
/// fact must carry a decision.
#[allow(clippy::too_many_arguments)]
pub fn triage_skips(
    facts: &mut [AtomicFact],
    decisions: &BTreeMap<String, TriageDecision>,
    bank: &mut QuestionBank,
    theme: &str,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
    model_id: &str,
    regenerated: &mut BTreeMap<String, Vec<QAPair>>,
) -> Result<(), SynthesisError> {
    for fact in facts.iter_mut() {
        if fact.status != FactStatus::SkippedRelated {
            continue;
        }
        match decisions.get(&fact.fact_id) {
            None => return Err(SynthesisError::TriageIncomplete(fact.fact_id.clone())),
            Some(TriageDecision::Filter) => {
                fact.status = FactStatus::FilteredUnrelated;
                fact.triage_note = Some("filtered at triage".to_string());
            }
            Some(TriageDecision::Regenerate) => {
                let outcome = fact_generate(
                    fact,
                    PAIRS_PER_FACT,
                    bank,
                    theme,
                    gateway,
                    tokenizer,
                    model_id,
                    false,
                )?;
                if let FactGenOutcome::Pairs { pairs, .. } = outcome {
                    regenerated.insert(fact.fact_id.clone(), pairs);
                }
                fact.status = FactStatus::Accepted;
                fact.triage_note = Some("regenerated without skip".to_string());
            }
        }
    }
    Ok(())
}

/// Build the 10x fact-mode dataset over accepted facts. Returns the manifest,
/// the bank, and the ids of underfilled facts (reported, not fatal).
#[allow(clippy::too_many_arguments)]
pub fn build_fact_dataset(
    doc_id: &str,
    facts: &[AtomicFact],
    pair_map: &BTreeMap<String, Vec<QAPair>>,
    tokenizer: &Tokenizer,
    spec_info: TokenizerSpecInfo,
) -> (DatasetManifest, Vec<String>) {
    let mut pairs = Vec::new();
    let mut pair_token_counts = Vec::new();
    let mut per_fact = Vec::new();
    let mut underfilled = Vec::new();
    let mut ordinal = 0usize;
    for fact in facts {
        if fact.status != FactStatus::Accepted {
            continue;
        }
        let fact_pairs = pair_map.get(&fact.fact_id).cloned().unwrap_or_default();
        if fact_pairs.len() < PAIRS_PER_FACT {
            underfilled.push(fact.fact_id.clone());
        }
        per_fact.push((fact.fact_id.clone(), fact_pairs.len()));
        for mut pair in fact_pairs {
            pair.generation_ordinal = ordinal;
            ordinal += 1;
            pair_token_counts.push(pair_tokens(tokenizer, &pair.question, &pair.answer));
            pairs.push(pair);
        }
    }
    let total_qa_tokens = pair_token_counts.iter().sum();
    let manifest = DatasetManifest {
        spec: DatasetSpec {
            mode: Mode::Fact,
            scale: 10,
            doc_id: doc_id.to_string(),
            tokenizer: spec_info,
            seed_pair: None,
        },
        pairs,
        pair_token_counts,
        total_qa_tokens,
        per_section: Vec::new(),
        per_fact,
        parent_manifest: None,
    };
    (manifest, underfilled)
}

/// Carve the 1x and 5x fact-mode subsets from a 10x parent.
pub fn carve_fact_scales(
    parent: &DatasetManifest,
    parent_digest: &str,
) -> Result<(DatasetManifest, DatasetManifest), SynthesisError> {
    let one = carve_fact_subsets(parent, 1, Some(parent_digest.to_string()))?;
    let five = carve_fact_subsets(parent, 5, Some(parent_digest.to_string()))?;
    Ok((one, five))
}

/// Build a token-mode evaluation set: the 1x loop re-run with dedup against
/// the full training bank, so eval questions are disjoint from train.
#[allow(clippy::too_many_arguments)]
pub fn build_token_eval_set(
    doc_id: &str,
    sections: &[DocSection],
    seed_pair: &QAPair,
    train_bank: &QuestionBank,
    theme: &str,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
    spec_info: TokenizerSpecInfo,
    model_id: &str,
) -> Result<DatasetManifest, SynthesisError> {
    let mut bank = train_bank.clone();
    bank.reindex();
    let train_len = bank.len();
    let params = GenerationParams::gen(model_id);
    let mut pairs = Vec::new();
    let mut pair_token_counts = Vec::new();
    let mut per_section = Vec::new();
    for section in sections {
        let outcome = token_scale_section(
            section,
            1,
            &mut bank,
            theme,
            &seed_pair.question,
            &seed_pair.answer,
            None,
            Origin::Eval,
            gateway,
            tokenizer,
            &params,
            "eval_gen",
        )?;
        pairs.extend(outcome.pairs);
        pair_token_counts.extend(outcome.pair_tokens);
        per_section.push(outcome.trace);
    }
    debug_assert_eq!(bank.len(), train_len + pairs.len());
    let total_qa_tokens = pair_token_counts.iter().sum();
    Ok(DatasetManifest {
        spec: DatasetSpec {
            mode: Mode::Token,
            scale: 1,
            doc_id: doc_id.to_string(),
            tokenizer: spec_info,
            seed_pair: None,
        },
        pairs,
        pair_token_counts,
        total_qa_tokens,
        per_section,
        per_fact: Vec::new(),
        parent_manifest: None,
    })
}

/// Build a fact-mode evaluation set: one unique pair per accepted fact,
/// disjoint from the training bank, using the no-skip prompt.
pub fn build_fact_eval_set(
    doc_id: &str,
    facts: &[AtomicFact],
    train_bank: &QuestionBank,
    theme: &str,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
    spec_info: TokenizerSpecInfo,
    model_id: &str,
) -> Result<DatasetManifest, SynthesisError> {
    let mut bank = train_bank.clone();
    bank.reindex();
    let mut pairs = Vec::new();
    let mut pair_token_counts = Vec::new();
    let mut per_fact = Vec::new();
    let mut ordinal = 0usize;
    for fact in facts {
        if fact.status != FactStatus::Accepted {
            continue;
        }
        let outcome = fact_generate(
            fact, 1, &mut bank, theme, gateway, tokenizer, model_id, false,
        )?;
        if let FactGenOutcome::Pairs { pairs: got, .. } = outcome {
            per_fact.push((fact.fact_id.clone(), got.len()));
            for mut pair in got {
                pair.origin = Origin::Eval;
                pair.generation_ordinal = ordinal;
                ordinal += 1;
                pair_token_counts.push(pair_tokens(tokenizer, &pair.question, &pair.answer));
                pairs.push(pair);
            }
        }
    }
    let total_qa_tokens = pair_token_counts.iter().sum();
    Ok(DatasetManifest {
        spec: DatasetSpec {
            mode: Mode::Fact,
            scale: 1,
            doc_id: doc_id.to_string(),
            tokenizer: spec_info,
            seed_pair: None,
        },
        pairs,
        pair_token_counts,
        total_qa_tokens,
        per_section: Vec::new(),
        per_fact,
        parent_manifest: None,
    })
}

#[derive(Serialize)]
struct FinetuneMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct FinetuneRecord<'a> {
    messages: Vec<FinetuneMessage<'a>>,
}

/// Export a manifest as a fine-tune JSONL file: one record per pair with
/// system/user/assistant messages, in acceptance order.
pub fn export_finetune_file(
    manifest: &DatasetManifest,
    system_prompt: &str,
    path: &Path,
) -> Result<(), SynthesisError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for pair in &manifest.pairs {
        let record = FinetuneRecord {
            messages: vec![
                FinetuneMessage {
                    role: "system",
                    content: system_prompt,
                },
                FinetuneMessage {
                    role: "user",
                    content: &pair.question,
                },
                FinetuneMessage {
                    role: "assistant",
                    content: &pair.answer,
                },
            ],
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Canonical manifest bytes: pretty JSON plus trailing newline. Digests and
/// determinism checks both run over these bytes.
pub fn manifest_bytes(manifest: &DatasetManifest) -> Result<Vec<u8>, SynthesisError> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn manifest_digest(manifest: &DatasetManifest) -> Result<String, SynthesisError> {
    Ok(hex::encode(Sha256::digest(manifest_bytes(manifest)?)))
}

/// Write a manifest; returns its content digest.
pub fn store_manifest(path: &Path, manifest: &DatasetManifest) -> Result<String, SynthesisError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let bytes = manifest_bytes(manifest)?;
    std::fs::write(path, &bytes)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, SynthesisError> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Conventional dataset file name: datasets/<doc>/<mode>_<scale>x.json.
pub fn manifest_path(root: &Path, doc_id: &str, mode: Mode, scale: u32, eval: bool) -> PathBuf {
    let mode = match mode {
        Mode::Token => "token",
        Mode::Fact => "fact",
    };
    let stem = if eval {
        format!("{mode}_eval")
    } else {
        format!("{mode}_{scale}x")
    };
    root.join("datasets")
        .join(doc_id)
        .join(format!("{stem}.json"))
}
