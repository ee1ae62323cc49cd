//! Answer grading and accuracy aggregation: the binary judge protocol,
//! Wilson intervals, relative changes, token-multiplier tables, and the
//! cross-evaluation grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use factgen_core::scaling::DatasetManifest;
use factgen_core::stats::{
    format_signed_pct, relative_change, round_half_even, token_multiplier, wilson_interval,
    StatsError, Z_95,
};

use crate::gateway::{ChatRequest, Gateway, GatewayError, GenerationParams};
use crate::prompts;

/// Judge retries tolerated before an answer is tallied ungradable.
pub const MAX_JUDGE_ATTEMPTS: u32 = 3;
/// run_eval aborts when more than this fraction of questions error out.
pub const MAX_ERROR_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("judge output unusable after {MAX_JUDGE_ATTEMPTS} attempts: {last:?}")]
    UngradableAnswer { last: String },
    #[error("fixture answers missing question: {0}")]
    MissingAnswer(String),
    #[error("{errored} of {total} questions errored (limit {MAX_ERROR_FRACTION})")]
    TooManyErrors { errored: usize, total: usize },
    #[error("tokenizer specs differ between manifests")]
    TokenizerMismatch,
    #[error("relative change undefined: {0}")]
    Stats(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl From<StatsError> for EvalError {
    fn from(e: StatsError) -> Self {
        EvalError::Stats(e.to_string())
    }
}

/// Where candidate answers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnswerSource {
    /// Model under test, queried through the gateway with EVAL params.
    Endpoint { model_id: String },
    /// Answers pre-computed by the RAG pipeline, keyed by question.
    RagPipeline { answers: BTreeMap<String, String> },
    /// Fixture mapping every eval question to an answer.
    FixtureFile { answers: BTreeMap<String, String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub question: String,
    pub ref_answer: String,
    pub pred_answer: String,
    /// None when the judge never produced a usable 0/1.
    pub grade: Option<u8>,
    pub judge_raw: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub wilson_95: (f64, f64),
    pub ungradable: usize,
    pub errored: usize,
    pub per_section: BTreeMap<usize, (usize, usize)>,
    pub per_fact: BTreeMap<String, (usize, usize)>,
    pub manifest_digest: String,
    pub source: String,
}

/// Grade one answer with the binary judge prompt under EVAL params.
/// Non-conforming judge output is retried with a fresh attempt index.
pub fn grade_answer(
    question: &str,
    ref_answer: &str,
    pred_answer: &str,
    theme: &str,
    gateway: &Gateway,
    judge_model_id: &str,
) -> Result<GradeRecord, EvalError> {
    let request = ChatRequest {
        system: prompts::grader_system_prompt(theme),
        user: prompts::grading_prompt(question, ref_answer, pred_answer),
        params: GenerationParams::eval(judge_model_id),
        tag: "judge".to_string(),
    };
    let mut last = String::new();
    for attempt in 0..MAX_JUDGE_ATTEMPTS {
        let response = gateway.complete_attempt(&request, attempt)?;
        last = response.text.clone();
        match response.text.trim() {
            "0" => {
                return Ok(GradeRecord {
                    question: question.to_string(),
                    ref_answer: ref_answer.to_string(),
                    pred_answer: pred_answer.to_string(),
                    grade: Some(0),
                    judge_raw: response.text,
                    attempts: attempt + 1,
                })
            }
            "1" => {
                return Ok(GradeRecord {
                    question: question.to_string(),
                    ref_answer: ref_answer.to_string(),
                    pred_answer: pred_answer.to_string(),
                    grade: Some(1),
                    judge_raw: response.text,
                    attempts: attempt + 1,
                })
            }
            _ => continue,
        }
    }
    Err(EvalError::UngradableAnswer { last })
}

fn fetch_answer(
    question: &str,
    source: &AnswerSource,
    _theme: &str,
    gateway: &Gateway,
) -> Result<String, EvalError> {
    match source {
        AnswerSource::Endpoint { model_id } => {
            let request = ChatRequest {
                system: prompts::SYSTEM_SPORTING.to_string(),
                user: question.to_string(),
                params: GenerationParams::eval(model_id),
                tag: "answer".to_string(),
            };
            Ok(gateway.complete(&request)?.text)
        }
        AnswerSource::RagPipeline { answers } | AnswerSource::FixtureFile { answers } => answers
            .get(question)
            .cloned()
            .ok_or_else(|| EvalError::MissingAnswer(question.to_string())),
    }
}

fn source_label(source: &AnswerSource) -> String {
    match source {
        AnswerSource::Endpoint { model_id } => format!("endpoint:{model_id}"),
        AnswerSource::RagPipeline { .. } => "rag".to_string(),
        AnswerSource::FixtureFile { .. } => "fixture".to_string(),
    }
}

/// Evaluate every pair in the manifest: fetch an answer, grade it, aggregate.
/// Per-question errors are tolerated up to MAX_ERROR_FRACTION of the set.
#[allow(clippy::too_many_arguments)]
pub fn run_eval(
    manifest: &DatasetManifest,
    manifest_digest: &str,
    source: &AnswerSource,
    theme: &str,
    gateway: &Gateway,
    judge_model_id: &str,
) -> Result<(AccuracyReport, Vec<GradeRecord>), EvalError> {
    if manifest.pairs.is_empty() {
        return Err(EvalError::EmptyEvalSet);
    }
    let total = manifest.pairs.len();
    let mut records = Vec::new();
    let mut correct = 0usize;
    let mut graded = 0usize;
    let mut ungradable = 0usize;
    let mut errored = 0usize;
    let mut per_section: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut per_fact: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    for pair in &manifest.pairs {
        let outcome = fetch_answer(&pair.question, source, theme, gateway).and_then(|answer| {
            match grade_answer(
                &pair.question,
                &pair.answer,
                &answer,
                theme,
                gateway,
                judge_model_id,
            ) {
                Ok(record) => Ok(record),
                Err(EvalError::UngradableAnswer { last }) => Ok(GradeRecord {
                    question: pair.question.clone(),
                    ref_answer: pair.answer.clone(),
                    pred_answer: answer,
                    grade: None,
                    judge_raw: last,
                    attempts: MAX_JUDGE_ATTEMPTS,
                }),
                Err(e) => Err(e),
            }
        });
        match outcome {
            Ok(record) => {
                match record.grade {
                    Some(g) => {
                        graded += 1;
                        let hit = g == 1;
                        if hit {
                            correct += 1;
                        }
                        if let Some(section) = pair.section_index {
                            let entry = per_section.entry(section).or_insert((0, 0));
                            entry.1 += 1;
                            if hit {
                                entry.0 += 1;
                            }
                        }
                        if let Some(fact) = &pair.fact_id {
                            let entry = per_fact.entry(fact.clone()).or_insert((0, 0));
                            entry.1 += 1;
                            if hit {
                                entry.0 += 1;
                            }
                        }
                    }
                    None => ungradable += 1,
                }
                records.push(record);
            }
            Err(_) => {
                errored += 1;
                if errored as f64 > MAX_ERROR_FRACTION * total as f64 {
                    return Err(EvalError::TooManyErrors { errored, total });
                }
            }
        }
    }
    if graded == 0 {
        return Err(EvalError::EmptyEvalSet);
    }
    let wilson_95 = wilson_interval(correct, graded, Z_95)?;
    let report = AccuracyReport {
        n: graded,
        correct,
        accuracy: correct as f64 / graded as f64,
        wilson_95,
        ungradable,
        errored,
        per_section,
        per_fact,
        manifest_digest: manifest_digest.to_string(),
        source: source_label(source),
    };
    Ok((report, records))
}

/// Table 1 counterpart: multiplier per (doc, scale), fact total over the
/// token-mode 1x total of the same document, rendered to 2 decimals.
pub fn token_multiplier_table(
    fact_manifests: &[&DatasetManifest],
    token_1x: &BTreeMap<String, &DatasetManifest>,
) -> Result<Vec<(String, u32, f64)>, EvalError> {
    let mut rows = Vec::new();
    for fact in fact_manifests {
        let base = token_1x
            .get(&fact.spec.doc_id)
            .ok_or_else(|| EvalError::MissingAnswer(fact.spec.doc_id.clone()))?;
        if base.spec.tokenizer != fact.spec.tokenizer {
            return Err(EvalError::TokenizerMismatch);
        }
        let m = token_multiplier(fact.total_qa_tokens, base.total_qa_tokens)?;
        rows.push((
            fact.spec.doc_id.clone(),
            fact.spec.scale,
            round_half_even(m, 2),
        ));
    }
    Ok(rows)
}

/// Display form of a relative accuracy change, e.g. "+28.1%".
pub fn display_relative_change(before: f64, after: f64) -> Result<String, EvalError> {
    Ok(format_signed_pct(relative_change(before, after)?))
}

/// Accuracy grid over (source, eval set) plus per-source degradation between
/// the first and second eval set when both are present.
pub struct CrossEvalCell {
    pub source: String,
    pub eval_digest: String,
    pub report: AccuracyReport,
}

#[allow(clippy::too_many_arguments)]
pub fn cross_eval_matrix(
    sources: &[AnswerSource],
    eval_sets: &[(&DatasetManifest, String)],
    theme: &str,
    gateway: &Gateway,
    judge_model_id: &str,
) -> Result<(Vec<CrossEvalCell>, Vec<(String, String)>), EvalError> {
    let mut cells = Vec::new();
    for source in sources {
        for (manifest, digest) in eval_sets {
            let (report, _) = run_eval(manifest, digest, source, theme, gateway, judge_model_id)?;
            cells.push(CrossEvalCell {
                source: source_label(source),
                eval_digest: digest.clone(),
                report,
            });
        }
    }
    let mut degradation = Vec::new();
    if eval_sets.len() >= 2 {
        for source in sources {
            let label = source_label(source);
            let on: Vec<&CrossEvalCell> = cells.iter().filter(|c| c.source == label).collect();
            if on.len() >= 2 && on[0].report.accuracy > 0.0 {
                degradation.push((
                    label,
                    display_relative_change(on[0].report.accuracy, on[1].report.accuracy)?,
                ));
            }
        }
    }
    Ok((cells, degradation))
}

/// Persist a run: grades.jsonl, report.json under runs/<run_id>/.
pub fn store_run(
    root: &Path,
    run_id: &str,
    report: &AccuracyReport,
    records: &[GradeRecord],
) -> Result<PathBuf, EvalError> {
    let dir = root.join("runs").join(run_id);
    store_run_at(&dir, report, records)?;
    Ok(dir)
}

/// Persist a run into an explicit directory.
pub fn store_run_at(
    dir: &Path,
    report: &AccuracyReport,
    records: &[GradeRecord],
) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir)?;
    let mut jsonl = String::new();
    for record in records {
        jsonl.push_str(&serde_json::to_string(record)?);
        jsonl.push('\n');
    }
    std::fs::write(dir.join("grades.jsonl"), jsonl)?;
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("report.json"), bytes)?;
    Ok(())
}

pub fn load_report(root: &Path, run_id: &str) -> Result<AccuracyReport, EvalError> {
    let bytes = std::fs::read(root.join("runs").join(run_id).join("report.json"))?;
    Ok(serde_json::from_slice(&bytes)?)
}
