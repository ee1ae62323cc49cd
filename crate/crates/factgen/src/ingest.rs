//! Article ingestion: fetch plain-text extracts over the MediaWiki wire
//! format, split them into sections, clean them, and persist the corpus
//! layout (`corpus/<doc_id>/raw.json`, `sections.jsonl`, `corpus/manifest.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use factgen_core::clean::{clean_sections, CleanDecision, CleanPolicy, DocSection, RawSection};
use factgen_core::tokenize::Tokenizer;

pub const CORPUS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub title: String,
    /// Contextualizing snippet inserted into prompts.
    pub theme: String,
    pub sections: Vec<RawSection>,
    pub fetched_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_revision: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub documents: Vec<String>,
    pub clean_policy: CleanPolicy,
    pub created_at: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("article not found: {0}")]
    NotFound(String),
    #[error("malformed payload at byte offset {offset}: {detail}")]
    Parse { offset: usize, detail: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema version mismatch: found {found}, expected {expected}")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Turn a title into a filesystem-safe doc_id slug. Apostrophes vanish
/// ("Master's" -> "masters"); other non-alphanumerics collapse to dashes.
pub fn slugify(title: &str) -> String {
    let mut slug = String::new();
    let mut prev_dash = true;
    for c in title.chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            slug.extend(c.to_lowercase());
            prev_dash = false;
        } else if !prev_dash {
            slug.push('-');
            prev_dash = true;
        }
    }
    slug.trim_end_matches('-').to_string()
}

/// Doc ids come from the theme snippet with its leading articles removed,
/// so that every artifact path is stable regardless of title edits.
pub fn theme_slug(theme: &str) -> String {
    let mut rest = theme.trim();
    for word in ["the", "recent"] {
        let lower = rest.to_lowercase();
        if let Some(tail) = lower.strip_prefix(word) {
            if tail.starts_with(char::is_whitespace) {
                rest = rest[word.len()..].trim_start();
            }
        }
    }
    slugify(rest)
}

/// Split an `explaintext` extract into sections. Heading lines look like
/// `== Heading ==`; text before the first heading becomes the lead section,
/// headed "Overview".
pub fn split_extract(extract: &str) -> Vec<RawSection> {
    let mut sections: Vec<RawSection> = Vec::new();
    let mut heading = "Overview".to_string();
    let mut body = String::new();
    let flush = |heading: &str, body: &mut String, sections: &mut Vec<RawSection>| {
        // the lead is always emitted; later sections are emitted even when
        // blank so cleaning (not splitting) decides what survives
        let index = sections.len();
        sections.push(RawSection {
            heading: heading.to_string(),
            body: body.trim_matches('\n').to_string(),
            index,
        });
        body.clear();
    };
    for line in extract.lines() {
        if let Some(h) = heading_text(line) {
            flush(&heading, &mut body, &mut sections);
            heading = h;
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    flush(&heading, &mut body, &mut sections);
    sections
}

fn heading_text(line: &str) -> Option<String> {
    let trimmed = line.trim();
    if !trimmed.starts_with("==") || !trimmed.ends_with("==") || trimmed.len() < 5 {
        return None;
    }
    let inner = trimmed.trim_matches('=').trim();
    if inner.is_empty() {
        None
    } else {
        Some(inner.to_string())
    }
}

#[derive(Deserialize)]
struct WikiResponse {
    query: WikiQuery,
}

#[derive(Deserialize)]
struct WikiQuery {
    pages: serde_json::Map<String, serde_json::Value>,
}

/// Parse a raw extracts payload into a document. Pure, so fixture payloads
/// exercise the same path as live fetches.
pub fn parse_extract_payload(
    payload: &str,
    title: &str,
    theme: &str,
    fetched_at: &str,
) -> Result<SourceDocument, IngestError> {
    let parsed: WikiResponse = serde_json::from_str(payload).map_err(|e| IngestError::Parse {
        offset: byte_offset(payload, e.line(), e.column()),
        detail: e.to_string(),
    })?;
    let page = parsed
        .query
        .pages
        .values()
        .next()
        .ok_or_else(|| IngestError::NotFound(title.to_string()))?;
    if page.get("missing").is_some() || page.get("extract").is_none() {
        return Err(IngestError::NotFound(title.to_string()));
    }
    let extract = page["extract"].as_str().unwrap_or_default();
    let revision = page
        .get("revid")
        .and_then(|v| v.as_u64())
        .map(|v| v.to_string());
    Ok(SourceDocument {
        doc_id: theme_slug(theme),
        title: title.to_string(),
        theme: theme.to_string(),
        sections: split_extract(extract),
        fetched_at: fetched_at.to_string(),
        source_revision: revision,
    })
}

fn byte_offset(payload: &str, line: usize, column: usize) -> usize {
    payload
        .lines()
        .take(line.saturating_sub(1))
        .map(|l| l.len() + 1)
        .sum::<usize>()
        + column.saturating_sub(1)
}

/// Fetch one article over the text-extracts wire format. The raw payload is
/// returned alongside the parsed document so callers can archive it verbatim.
pub fn fetch_article(
    title: &str,
    theme: &str,
    endpoint: &str,
) -> Result<(SourceDocument, String), IngestError> {
    let client = reqwest::blocking::Client::new();
    let response = client
        .get(endpoint)
        .query(&[
            ("action", "query"),
            ("prop", "extracts"),
            ("explaintext", "1"),
            ("format", "json"),
            ("titles", title),
        ])
        .send()
        .map_err(|e| IngestError::Network(e.to_string()))?;
    if !response.status().is_success() {
        return Err(IngestError::Network(response.status().to_string()));
    }
    let payload = response
        .text()
        .map_err(|e| IngestError::Network(e.to_string()))?;
    let fetched_at = chrono::Utc::now().to_rfc3339();
    let doc = parse_extract_payload(&payload, title, theme, &fetched_at)?;
    Ok((doc, payload))
}

/// Clean a document's sections and fill token counts.
pub fn clean_document(
    doc: &SourceDocument,
    policy: &CleanPolicy,
    tokenizer: &Tokenizer,
) -> (Vec<DocSection>, Vec<CleanDecision>) {
    let (mut kept, log) = clean_sections(&doc.sections, policy);
    for section in &mut kept {
        section.token_count = tokenizer.count(&section.body);
    }
    (kept, log)
}

fn doc_dir(root: &Path, doc_id: &str) -> PathBuf {
    root.join("corpus").join(doc_id)
}

/// Persist one document: verbatim payload, parsed form, cleaned sections.
pub fn store_document(
    root: &Path,
    doc: &SourceDocument,
    raw_payload: &str,
    sections: &[DocSection],
) -> Result<(), IngestError> {
    let dir = doc_dir(root, &doc.doc_id);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("raw.json"), raw_payload)?;
    std::fs::write(dir.join("document.json"), serde_json::to_vec_pretty(doc)?)?;
    let mut jsonl = String::new();
    for section in sections {
        jsonl.push_str(&serde_json::to_string(section)?);
        jsonl.push('\n');
    }
    std::fs::write(dir.join("sections.jsonl"), jsonl)?;
    Ok(())
}

pub fn load_document(root: &Path, doc_id: &str) -> Result<SourceDocument, IngestError> {
    let path = doc_dir(root, doc_id).join("document.json");
    let bytes = std::fs::read(&path).map_err(|_| IngestError::MissingFile(path.clone()))?;
    serde_json::from_slice(&bytes).map_err(|e| IngestError::Parse {
        offset: 0,
        detail: e.to_string(),
    })
}

pub fn load_sections(root: &Path, doc_id: &str) -> Result<Vec<DocSection>, IngestError> {
    let path = doc_dir(root, doc_id).join("sections.jsonl");
    let text =
        std::fs::read_to_string(&path).map_err(|_| IngestError::MissingFile(path.clone()))?;
    text.lines()
        .map(|line| {
            serde_json::from_str(line).map_err(|e| IngestError::Parse {
                offset: 0,
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn store_corpus(root: &Path, manifest: &CorpusManifest) -> Result<PathBuf, IngestError> {
    let dir = root.join("corpus");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_vec_pretty(manifest)?)?;
    Ok(path)
}

pub fn load_corpus(path: &Path) -> Result<CorpusManifest, IngestError> {
    let bytes = std::fs::read(path).map_err(|_| IngestError::MissingFile(path.to_path_buf()))?;
    let manifest: CorpusManifest =
        serde_json::from_slice(&bytes).map_err(|e| IngestError::Parse {
            offset: 0,
            detail: e.to_string(),
        })?;
    if manifest.schema_version != CORPUS_SCHEMA_VERSION {
        return Err(IngestError::SchemaMismatch {
            found: manifest.schema_version,
            expected: CORPUS_SCHEMA_VERSION,
        });
    }
    Ok(manifest)
}

impl From<serde_json::Error> for IngestError {
    fn from(e: serde_json::Error) -> Self {
        IngestError::Parse {
            offset: 0,
            detail: e.to_string(),
        }
    }
}
