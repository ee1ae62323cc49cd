//! Stage orchestration behind the CLI subcommands. Each stage reads the
//! artifacts of earlier stages from the output root, writes its own, and
//! appends a ledger entry with content digests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use factgen_core::coverage::{assign_multilabel, coverage_report, CoverageReport};
use factgen_core::qa::{AtomicFact, FactStatus, Origin, QAPair, QuestionBank};
use factgen_core::scaling::{DatasetManifest, Mode};
use factgen_core::tokenize::{BpeVocab, Tokenizer, TokenizerSpecInfo};

use crate::config::{BackendChoice, RunConfig};
use crate::coverage_io::{embed_facts, embed_manifest_pairs, write_embedding_cache};
use crate::eval::{run_eval, store_run, AccuracyReport, AnswerSource, EvalError};
use crate::gateway::{Gateway, LiveConfig, MockConfig, MockEmbedStyle, ReplayStore};
use crate::ingest::{
    clean_document, load_corpus, load_document, load_sections, parse_extract_payload, store_corpus,
    store_document, CorpusManifest, IngestError, SourceDocument, CORPUS_SCHEMA_VERSION,
};
use crate::ledger::{LedgerEntry, RunLedger};
use crate::rag::{answer_with_context, build_index, load_index, retrieve, store_index, RagError};
use crate::report::{coverage_csv, coverage_svg, render_scaling_table, SCALING_COLUMNS};
use crate::synthesis::{
    build_fact_dataset, build_fact_eval_set, build_token_dataset, build_token_eval_set,
    carve_fact_scales, carve_token_subsets, export_finetune_file, extract_atomic_facts,
    fact_generate, manifest_digest, manifest_path, parse_decisions, store_manifest, triage_skips,
    FactGenOutcome, SynthesisError, PAIRS_PER_FACT,
};

/// Timestamp recorded for bundled fixtures so artifacts are reproducible.
pub const FIXTURE_TIMESTAMP: &str = "2024-06-01T00:00:00Z";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input: {0} (run the earlier stage first)")]
    MissingInput(PathBuf),
    #[error("no bundled seed pair for document {0}")]
    MissingSeed(String),
    #[error("stage {stage} failed: {detail}")]
    Stage { stage: String, detail: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("artifact parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// The six bundled article payloads, keyed by doc_id slug.
pub fn bundled_articles() -> BTreeMap<&'static str, (&'static str, &'static str)> {
    // slug -> (title, raw payload)
    BTreeMap::from([
        (
            "2023-cricket-world-cup",
            (
                "2023 Cricket World Cup",
                include_str!("../assets/articles/2023-cricket-world-cup.json"),
            ),
        ),
        (
            "2018-fifa-world-cup",
            (
                "2018 FIFA World Cup",
                include_str!("../assets/articles/2018-fifa-world-cup.json"),
            ),
        ),
        (
            "2023-fifa-womens-world-cup",
            (
                "2023 FIFA Women's World Cup",
                include_str!("../assets/articles/2023-fifa-womens-world-cup.json"),
            ),
        ),
        (
            "2023-superbowl-lvii",
            (
                "Super Bowl LVII",
                include_str!("../assets/articles/2023-superbowl-lvii.json"),
            ),
        ),
        (
            "2023-ncaa-division-i-mens-basketball-tournament",
            (
                "2023 NCAA Division I men's basketball tournament",
                include_str!(
                    "../assets/articles/2023-ncaa-division-i-mens-basketball-tournament.json"
                ),
            ),
        ),
        (
            "2023-pga-masters-tournament",
            (
                "2023 Masters Tournament",
                include_str!("../assets/articles/2023-pga-masters-tournament.json"),
            ),
        ),
    ])
}

#[derive(Deserialize)]
struct SeedEntry {
    question: String,
    answer: String,
}

/// The repo-authored manual seed pair for a document.
pub fn bundled_seed(doc_id: &str) -> Result<QAPair, PipelineError> {
    let seeds: BTreeMap<String, SeedEntry> =
        serde_json::from_str(include_str!("../assets/seeds.json"))?;
    let entry = seeds
        .get(doc_id)
        .ok_or_else(|| PipelineError::MissingSeed(doc_id.to_string()))?;
    Ok(QAPair {
        question: entry.question.clone(),
        answer: entry.answer.clone(),
        origin: Origin::Seed,
        section_index: None,
        fact_id: None,
        generation_ordinal: 0,
    })
}

/// Construct the gateway named by the config.
pub fn make_gateway(config: &RunConfig) -> Result<Gateway, PipelineError> {
    let gateway = match config.backend {
        BackendChoice::Mock => Gateway::mock(MockConfig {
            embed_style: MockEmbedStyle::BagOfWords,
            embed_dim: 128,
            ..MockConfig::default()
        }),
        BackendChoice::Replay => {
            let store = ReplayStore::open(config.output_root.join("cache"))?;
            Gateway::replay(store).with_embed_model(&config.embed_model_id)
        }
        BackendChoice::Live => {
            let live = LiveConfig::from_env().map_err(|e| PipelineError::Stage {
                stage: "gateway".into(),
                detail: e.to_string(),
            })?;
            let store = ReplayStore::open(config.output_root.join("cache"))?;
            Gateway::live(live, store, &config.embed_model_id)
        }
    };
    Ok(gateway)
}

/// Load the tokenizer named by the config.
pub fn make_tokenizer(config: &RunConfig) -> Result<(Tokenizer, TokenizerSpecInfo), PipelineError> {
    match &config.bpe_vocab {
        None => Ok((Tokenizer::Whitespace, TokenizerSpecInfo::whitespace())),
        Some(path) => {
            let bytes =
                std::fs::read(path).map_err(|_| PipelineError::MissingInput(path.clone()))?;
            let vocab: BpeVocab = serde_json::from_slice(&bytes)?;
            let tokenizer = Tokenizer::Bpe(vocab);
            let info = tokenizer.spec_info(Some(path.display().to_string()));
            Ok((tokenizer, info))
        }
    }
}

fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn ledger_entry(
    root: &Path,
    stage: &str,
    artifacts: &[PathBuf],
    gateway: Option<&Gateway>,
    warnings: Vec<String>,
) -> Result<(), PipelineError> {
    let ledger = RunLedger::open(root)?;
    let mut digests = BTreeMap::new();
    for path in artifacts {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .display()
            .to_string();
        digests.insert(rel, file_digest(path)?);
    }
    ledger.append(&LedgerEntry {
        stage: stage.to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        artifacts: digests,
        budget: gateway.map(|g| g.budget_report()).unwrap_or_default(),
        warnings,
    })?;
    Ok(())
}

/// Ingest stage: parse article payloads (bundled fixtures, or a live
/// endpoint when given), clean, and persist the corpus layout.
pub fn cmd_ingest(config: &RunConfig, endpoint: Option<&str>) -> Result<(), PipelineError> {
    let root = &config.output_root;
    let (tokenizer, _) = make_tokenizer(config)?;
    let themes = crate::prompts::bundled_themes();
    let mut documents = Vec::new();
    let mut artifacts = Vec::new();
    for (slug, (title, payload)) in bundled_articles() {
        let theme = themes.get(slug).copied().unwrap_or(title);
        let (doc, raw): (SourceDocument, String) = match endpoint {
            Some(endpoint) => crate::ingest::fetch_article(title, theme, endpoint)?,
            None => (
                parse_extract_payload(payload, title, theme, FIXTURE_TIMESTAMP)?,
                payload.to_string(),
            ),
        };
        let policy = factgen_core::clean::CleanPolicy::default();
        let (sections, _log) = clean_document(&doc, &policy, &tokenizer);
        store_document(root, &doc, &raw, &sections)?;
        let dir = root.join("corpus").join(&doc.doc_id);
        artifacts.extend([
            dir.join("raw.json"),
            dir.join("document.json"),
            dir.join("sections.jsonl"),
        ]);
        documents.push(doc.doc_id);
    }
    let manifest = CorpusManifest {
        schema_version: CORPUS_SCHEMA_VERSION,
        documents,
        clean_policy: factgen_core::clean::CleanPolicy::default(),
        created_at: FIXTURE_TIMESTAMP.to_string(),
    };
    let manifest_file = store_corpus(root, &manifest)?;
    artifacts.push(manifest_file);
    ledger_entry(root, "ingest", &artifacts, None, vec![])?;
    Ok(())
}

fn require(path: PathBuf) -> Result<PathBuf, PipelineError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::MissingInput(path))
    }
}

fn load_corpus_manifest(config: &RunConfig) -> Result<CorpusManifest, PipelineError> {
    let path = require(config.corpus_manifest.clone())?;
    Ok(load_corpus(&path)?)
}

pub fn facts_path(root: &Path, doc_id: &str) -> PathBuf {
    root.join("datasets").join(doc_id).join("facts.jsonl")
}

fn store_facts(path: &Path, facts: &[AtomicFact]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for fact in facts {
        out.push_str(&serde_json::to_string(fact)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_facts(path: &Path) -> Result<Vec<AtomicFact>, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| PipelineError::MissingInput(path.to_path_buf()))?;
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(PipelineError::from))
        .collect()
}

/// Synthesis stage: token and/or fact datasets at the configured scales,
/// evaluation sets, and fine-tune exports, per document.
pub fn cmd_synth(
    config: &RunConfig,
    gateway: &Gateway,
    decisions_file: Option<&Path>,
) -> Result<(), PipelineError> {
    let root = &config.output_root;
    let corpus = load_corpus_manifest(config)?;
    let (tokenizer, spec_info) = make_tokenizer(config)?;
    let mut artifacts = Vec::new();
    let mut warnings = Vec::new();

    for doc_id in &corpus.documents {
        let doc = load_document(root, doc_id)?;
        let sections = load_sections(root, doc_id)?;
        let theme = doc.theme.clone();

        if config.mode == "token" || config.mode == "both" {
            let seed = bundled_seed(doc_id)?;
            let (parent, bank) = build_token_dataset(
                doc_id,
                &sections,
                &seed,
                &theme,
                gateway,
                &tokenizer,
                spec_info.clone(),
                10,
                &config.gen_model_id,
            )?;
            let digest = manifest_digest(&parent)?;
            let (one, five) = carve_token_subsets(&parent, &digest)?;
            for manifest in [&parent, &five, &one] {
                if !config.scales.contains(&manifest.spec.scale) {
                    continue;
                }
                let path = manifest_path(root, doc_id, Mode::Token, manifest.spec.scale, false);
                store_manifest(&path, manifest)?;
                let train = path.with_extension("jsonl");
                export_finetune_file(manifest, crate::prompts::SYSTEM_SPORTING, &train)?;
                artifacts.extend([path, train]);
            }
            let eval = build_token_eval_set(
                doc_id,
                &sections,
                &seed,
                &bank,
                &theme,
                gateway,
                &tokenizer,
                spec_info.clone(),
                &config.gen_model_id,
            )?;
            let eval_path = manifest_path(root, doc_id, Mode::Token, 1, true);
            store_manifest(&eval_path, &eval)?;
            artifacts.push(eval_path);
        }

        if config.mode == "fact" || config.mode == "both" {
            let mut seen = BTreeSet::new();
            let mut facts: Vec<AtomicFact> = Vec::new();
            for section in &sections {
                facts.extend(extract_atomic_facts(
                    doc_id,
                    section,
                    &theme,
                    gateway,
                    &config.gen_model_id,
                    &mut seen,
                )?);
            }
            let mut bank = QuestionBank::new();
            let mut pair_map: BTreeMap<String, Vec<QAPair>> = BTreeMap::new();
            for fact in facts.iter_mut() {
                match fact_generate(
                    fact,
                    PAIRS_PER_FACT,
                    &mut bank,
                    &theme,
                    gateway,
                    &tokenizer,
                    &config.gen_model_id,
                    true,
                )? {
                    FactGenOutcome::Skip => fact.status = FactStatus::SkippedRelated,
                    FactGenOutcome::Pairs { pairs, underfilled } => {
                        if underfilled {
                            warnings.push(format!("underfilled fact {}", fact.fact_id));
                        }
                        pair_map.insert(fact.fact_id.clone(), pairs);
                    }
                }
            }
            if facts.iter().any(|f| f.status == FactStatus::SkippedRelated) {
                let decisions = match decisions_file {
                    Some(path) => parse_decisions(&std::fs::read_to_string(path)?),
                    None => BTreeMap::new(),
                };
                triage_skips(
                    &mut facts,
                    &decisions,
                    &mut bank,
                    &theme,
                    gateway,
                    &tokenizer,
                    &config.gen_model_id,
                    &mut pair_map,
                )?;
            }
            let facts_file = facts_path(root, doc_id);
            store_facts(&facts_file, &facts)?;
            artifacts.push(facts_file);

            let (parent, underfilled) =
                build_fact_dataset(doc_id, &facts, &pair_map, &tokenizer, spec_info.clone());
            warnings.extend(underfilled.iter().map(|f| format!("underfilled fact {f}")));
            let digest = manifest_digest(&parent)?;
            let (one, five) = carve_fact_scales(&parent, &digest)?;
            for manifest in [&parent, &five, &one] {
                if !config.scales.contains(&manifest.spec.scale) {
                    continue;
                }
                let path = manifest_path(root, doc_id, Mode::Fact, manifest.spec.scale, false);
                store_manifest(&path, manifest)?;
                let train = path.with_extension("jsonl");
                export_finetune_file(manifest, crate::prompts::SYSTEM_SPORTING, &train)?;
                artifacts.extend([path, train]);
            }
            let eval = build_fact_eval_set(
                doc_id,
                &facts,
                &bank,
                &theme,
                gateway,
                &tokenizer,
                spec_info.clone(),
                &config.gen_model_id,
            )?;
            let eval_path = manifest_path(root, doc_id, Mode::Fact, 1, true);
            store_manifest(&eval_path, &eval)?;
            artifacts.push(eval_path);
        }
    }
    warnings.dedup();
    ledger_entry(root, "synth", &artifacts, Some(gateway), warnings)?;
    Ok(())
}

pub fn coverage_dir(root: &Path, doc_id: &str) -> PathBuf {
    root.join("coverage").join(doc_id)
}

/// Coverage stage: embed facts and token-mode pairs, assign at the
/// configured threshold, and persist reports, caches, CSV, and SVG.
pub fn cmd_coverage(config: &RunConfig, gateway: &Gateway) -> Result<(), PipelineError> {
    let root = &config.output_root;
    let corpus = load_corpus_manifest(config)?;
    let mut artifacts = Vec::new();
    for doc_id in &corpus.documents {
        let facts = load_facts(&facts_path(root, doc_id))?;
        let accepted: Vec<AtomicFact> = facts
            .into_iter()
            .filter(|f| f.status == FactStatus::Accepted)
            .collect();
        let fact_ids: Vec<String> = accepted.iter().map(|f| f.fact_id.clone()).collect();
        let fact_set =
            embed_facts(&accepted, gateway, "coverage").map_err(|e| PipelineError::Stage {
                stage: "coverage".into(),
                detail: e.to_string(),
            })?;
        let dir = coverage_dir(root, doc_id);
        std::fs::create_dir_all(&dir)?;
        let facts_cache = dir.join("facts.emb");
        write_embedding_cache(&facts_cache, &fact_set).map_err(|e| PipelineError::Stage {
            stage: "coverage".into(),
            detail: e.to_string(),
        })?;
        artifacts.push(facts_cache);
        for &scale in &config.scales {
            let manifest_file = require(manifest_path(root, doc_id, Mode::Token, scale, false))?;
            let manifest = crate::synthesis::load_manifest(&manifest_file)?;
            let qa_set = embed_manifest_pairs(&manifest, gateway, "coverage").map_err(|e| {
                PipelineError::Stage {
                    stage: "coverage".into(),
                    detail: e.to_string(),
                }
            })?;
            let qa_cache = dir.join(format!("token_{scale}x.emb"));
            write_embedding_cache(&qa_cache, &qa_set).map_err(|e| PipelineError::Stage {
                stage: "coverage".into(),
                detail: e.to_string(),
            })?;
            let matrix =
                assign_multilabel(&qa_set, &fact_set, config.coverage_threshold).map_err(|e| {
                    PipelineError::Stage {
                        stage: "coverage".into(),
                        detail: e.to_string(),
                    }
                })?;
            let report = coverage_report(&matrix, &fact_ids);
            let report_path = dir.join(format!("token_{scale}x.json"));
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            std::fs::write(&report_path, bytes)?;
            artifacts.extend([qa_cache, report_path]);
        }
    }
    ledger_entry(root, "coverage", &artifacts, Some(gateway), vec![])?;
    Ok(())
}

pub fn rag_dir(root: &Path, doc_id: &str) -> PathBuf {
    root.join("rag").join(doc_id)
}

/// RAG index stage: one hybrid index per document over cleaned sections.
pub fn cmd_rag_index(config: &RunConfig, gateway: &Gateway) -> Result<(), PipelineError> {
    let root = &config.output_root;
    let corpus = load_corpus_manifest(config)?;
    let mut artifacts = Vec::new();
    for doc_id in &corpus.documents {
        let sections = load_sections(root, doc_id)?;
        let index = build_index(doc_id, &sections, gateway)?;
        let dir = rag_dir(root, doc_id);
        store_index(&dir, &index)?;
        artifacts.extend([
            dir.join("chunks.jsonl"),
            dir.join("embeddings.bin"),
            dir.join("stats.json"),
        ]);
    }
    ledger_entry(root, "rag_index", &artifacts, Some(gateway), vec![])?;
    Ok(())
}

/// Answer one ad-hoc question against a persisted index.
pub fn cmd_rag_answer(
    config: &RunConfig,
    gateway: &Gateway,
    doc_id: &str,
    question: &str,
) -> Result<String, PipelineError> {
    let root = &config.output_root;
    let dir = require(rag_dir(root, doc_id))?;
    let index = load_index(&dir)?;
    let doc = load_document(root, doc_id)?;
    let results = retrieve(&index, question, config.retrieval_k, gateway)?;
    Ok(answer_with_context(
        question,
        &index,
        &results,
        &doc.theme,
        gateway,
        &config.gen_model_id,
    )?)
}

/// Evaluation stage: grade one answer source against each document's
/// fact-mode evaluation set.
pub fn cmd_eval(
    config: &RunConfig,
    gateway: &Gateway,
    source_spec: &str,
) -> Result<Vec<(String, AccuracyReport)>, PipelineError> {
    let root = &config.output_root;
    let corpus = load_corpus_manifest(config)?;
    let mut reports = Vec::new();
    let mut artifacts = Vec::new();
    for doc_id in &corpus.documents {
        let eval_path = require(manifest_path(root, doc_id, Mode::Fact, 1, true))?;
        let manifest = crate::synthesis::load_manifest(&eval_path)?;
        let digest = manifest_digest(&manifest)?;
        let doc = load_document(root, doc_id)?;
        let (source, label) = build_source(config, gateway, doc_id, &manifest, source_spec)?;
        let (report, records) = run_eval(
            &manifest,
            &digest,
            &source,
            &doc.theme,
            gateway,
            &config.judge_model_id,
        )?;
        let run_id = format!("{doc_id}-fact-{label}");
        let dir = store_run(root, &run_id, &report, &records)?;
        artifacts.extend([dir.join("grades.jsonl"), dir.join("report.json")]);
        reports.push((run_id, report));
    }
    ledger_entry(root, "eval", &artifacts, Some(gateway), vec![])?;
    Ok(reports)
}

/// Evaluate one explicit eval-set manifest, optionally into a custom
/// output directory (defaults to runs/<doc>-<mode>-<source> under the root).
pub fn cmd_eval_single(
    config: &RunConfig,
    gateway: &Gateway,
    eval_set: &Path,
    source_spec: &str,
    out: Option<&Path>,
) -> Result<(String, AccuracyReport), PipelineError> {
    let root = &config.output_root;
    let eval_path = require(eval_set.to_path_buf())?;
    let manifest = crate::synthesis::load_manifest(&eval_path)?;
    let digest = manifest_digest(&manifest)?;
    let doc_id = manifest.spec.doc_id.clone();
    let doc = load_document(root, &doc_id)?;
    let (source, label) = build_source(config, gateway, &doc_id, &manifest, source_spec)?;
    let (report, records) = run_eval(
        &manifest,
        &digest,
        &source,
        &doc.theme,
        gateway,
        &config.judge_model_id,
    )?;
    let mode = match manifest.spec.mode {
        Mode::Token => "token",
        Mode::Fact => "fact",
    };
    let run_id = format!("{doc_id}-{mode}-{label}");
    let dir = match out {
        Some(dir) => {
            crate::eval::store_run_at(dir, &report, &records)?;
            dir.to_path_buf()
        }
        None => store_run(root, &run_id, &report, &records)?,
    };
    let artifacts = vec![dir.join("grades.jsonl"), dir.join("report.json")];
    ledger_entry(root, "eval", &artifacts, Some(gateway), vec![])?;
    Ok((run_id, report))
}

fn build_source(
    config: &RunConfig,
    gateway: &Gateway,
    doc_id: &str,
    manifest: &DatasetManifest,
    source_spec: &str,
) -> Result<(AnswerSource, String), PipelineError> {
    let root = &config.output_root;
    match source_spec {
        "endpoint" => Ok((
            AnswerSource::Endpoint {
                model_id: config.gen_model_id.clone(),
            },
            "endpoint".to_string(),
        )),
        "rag" => {
            let dir = require(rag_dir(root, doc_id))?;
            let index = load_index(&dir)?;
            let doc = load_document(root, doc_id)?;
            let mut answers = BTreeMap::new();
            for pair in &manifest.pairs {
                let results = retrieve(&index, &pair.question, config.retrieval_k, gateway)?;
                let answer = answer_with_context(
                    &pair.question,
                    &index,
                    &results,
                    &doc.theme,
                    gateway,
                    &config.gen_model_id,
                )?;
                answers.insert(pair.question.clone(), answer);
            }
            Ok((AnswerSource::RagPipeline { answers }, "rag".to_string()))
        }
        spec if spec.starts_with("fixture:") => {
            let path = PathBuf::from(&spec["fixture:".len()..]);
            let path = require(path)?;
            let answers: BTreeMap<String, String> = serde_json::from_slice(&std::fs::read(&path)?)?;
            Ok((AnswerSource::FixtureFile { answers }, "fixture".to_string()))
        }
        other => Err(PipelineError::Stage {
            stage: "eval".into(),
            detail: format!("unknown answer source {other:?}"),
        }),
    }
}

/// Report stage: render the scaling table and coverage figures from
/// persisted artifacts only.
pub fn cmd_report(config: &RunConfig) -> Result<(), PipelineError> {
    let root = &config.output_root;
    let corpus = load_corpus_manifest(config)?;
    let reports_dir = root.join("reports");
    std::fs::create_dir_all(&reports_dir)?;
    let mut artifacts = Vec::new();

    // scaling table from whatever runs exist: runs/<doc>-fact-<column>
    let mut grid: BTreeMap<String, BTreeMap<String, AccuracyReport>> = BTreeMap::new();
    for doc_id in &corpus.documents {
        let mut cells = BTreeMap::new();
        for column in SCALING_COLUMNS {
            let run_id = format!("{doc_id}-fact-{column}");
            if let Ok(report) = crate::eval::load_report(root, &run_id) {
                cells.insert(column.to_string(), report);
            }
        }
        grid.insert(doc_id.clone(), cells);
    }
    let table_path = reports_dir.join("scaling_table.tsv");
    std::fs::write(&table_path, render_scaling_table(&grid))?;
    artifacts.push(table_path);

    // coverage figures from stored coverage reports
    for doc_id in &corpus.documents {
        for &scale in &config.scales {
            let report_path = coverage_dir(root, doc_id).join(format!("token_{scale}x.json"));
            if !report_path.exists() {
                continue;
            }
            let report: CoverageReport = serde_json::from_slice(&std::fs::read(&report_path)?)?;
            let csv_path = reports_dir.join(format!("{doc_id}_token_{scale}x_coverage.csv"));
            let svg_path = reports_dir.join(format!("{doc_id}_token_{scale}x_coverage.svg"));
            std::fs::write(&csv_path, coverage_csv(&report))?;
            std::fs::write(
                &svg_path,
                coverage_svg(&report, &format!("{doc_id} token {scale}x coverage")),
            )?;
            artifacts.extend([csv_path, svg_path]);
        }
    }
    ledger_entry(root, "report", &artifacts, None, vec![])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CONFIG_SCHEMA_VERSION;

    fn test_config(root: &Path) -> RunConfig {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            output_root: root.to_path_buf(),
            corpus_manifest: root.join("corpus/manifest.json"),
            mode: "both".into(),
            scales: vec![1, 5, 10],
            backend: BackendChoice::Mock,
            gen_model_id: "mock-gen".into(),
            judge_model_id: "mock-judge".into(),
            embed_model_id: "mock-embed".into(),
            coverage_threshold: 0.945,
            retrieval_k: 3,
            arbitration_seed: 0,
            bpe_vocab: None,
        }
    }

    #[test]
    fn bundled_articles_parse_and_clean() {
        let themes = crate::prompts::bundled_themes();
        for (slug, (title, payload)) in bundled_articles() {
            let doc = parse_extract_payload(payload, title, themes[slug], FIXTURE_TIMESTAMP)
                .unwrap_or_else(|e| panic!("{slug}: {e}"));
            assert_eq!(doc.doc_id, slug, "slug mismatch for {title}");
            assert!(
                doc.sections.len() >= 4,
                "{slug} has {} sections",
                doc.sections.len()
            );
            let (kept, _) = clean_document(
                &doc,
                &factgen_core::clean::CleanPolicy::default(),
                &Tokenizer::Whitespace,
            );
            // each fixture carries one table-residue section that must drop
            assert_eq!(kept.len(), doc.sections.len() - 1, "{slug}");
            assert!(bundled_seed(slug).is_ok(), "{slug} missing seed");
        }
    }

    #[test]
    fn eval_before_synth_names_missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let gateway = make_gateway(&config).unwrap();
        cmd_ingest(&config, None).unwrap();
        let err = cmd_eval(&config, &gateway, "endpoint").unwrap_err();
        match err {
            PipelineError::MissingInput(path) => {
                assert!(
                    path.to_string_lossy().contains("fact_eval.json"),
                    "{path:?}"
                );
            }
            other => panic!("expected MissingInput, got {other}"),
        }
    }
}
