//! Coverage plumbing: embed fact and Q&A sets through the gateway and cache
//! the vectors in a little-endian float32 binary format next to the dataset
//! manifests.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use factgen_core::coverage::{EmbeddingSet, SetKind};
use factgen_core::embed::EmbeddingVector;
use factgen_core::qa::AtomicFact;
use factgen_core::scaling::DatasetManifest;

use crate::gateway::{Gateway, GatewayError};

const CACHE_MAGIC: &[u8; 4] = b"EMBV";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CoverageIoError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad embedding cache: {0}")]
    BadCache(String),
}

/// Embed every accepted fact; ids are fact_ids.
pub fn embed_facts(
    facts: &[AtomicFact],
    gateway: &Gateway,
    tag: &str,
) -> Result<EmbeddingSet, CoverageIoError> {
    let mut items = Vec::new();
    for fact in facts {
        let vector = gateway.embed(&fact.text, tag)?;
        items.push((fact.fact_id.clone(), vector));
    }
    Ok(EmbeddingSet {
        items,
        kind: SetKind::Facts,
        embed_model_id: gateway.embed_model_id.clone(),
    })
}

/// Embed every pair in a manifest as "question answer" text; ids are
/// "qa:<ordinal>".
pub fn embed_manifest_pairs(
    manifest: &DatasetManifest,
    gateway: &Gateway,
    tag: &str,
) -> Result<EmbeddingSet, CoverageIoError> {
    let mut items = Vec::new();
    for pair in &manifest.pairs {
        let text = format!("{} {}", pair.question, pair.answer);
        let vector = gateway.embed(&text, tag)?;
        items.push((format!("qa:{}", pair.generation_ordinal), vector));
    }
    Ok(EmbeddingSet {
        items,
        kind: SetKind::QaPairs,
        embed_model_id: gateway.embed_model_id.clone(),
    })
}

/// Binary layout: "EMBV", u32 version, u32 dim, u32 item count,
/// u16 model-id length + bytes, then per item u16 id length + bytes followed
/// by dim little-endian f32 values.
pub fn write_embedding_cache(path: &Path, set: &EmbeddingSet) -> Result<(), CoverageIoError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let dim = set.dim().unwrap_or(0) as u32;
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(set.items.len() as u32).to_le_bytes());
    out.push(match set.kind {
        SetKind::Facts => 0,
        SetKind::QaPairs => 1,
    });
    out.extend_from_slice(&(set.embed_model_id.len() as u16).to_le_bytes());
    out.extend_from_slice(set.embed_model_id.as_bytes());
    for (id, vector) in &set.items {
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for &v in &vector.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], cursor: &mut usize, n: usize) -> Result<&'a [u8], CoverageIoError> {
    if *cursor + n > bytes.len() {
        return Err(CoverageIoError::BadCache("truncated file".into()));
    }
    let slice = &bytes[*cursor..*cursor + n];
    *cursor += n;
    Ok(slice)
}

pub fn read_embedding_cache(path: &Path) -> Result<EmbeddingSet, CoverageIoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;
    if take(&bytes, &mut cursor, 4)? != CACHE_MAGIC {
        return Err(CoverageIoError::BadCache("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut cursor, 4)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(CoverageIoError::BadCache(format!(
            "version {version}, expected {CACHE_VERSION}"
        )));
    }
    let dim = u32::from_le_bytes(take(&bytes, &mut cursor, 4)?.try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(take(&bytes, &mut cursor, 4)?.try_into().unwrap()) as usize;
    let kind = match take(&bytes, &mut cursor, 1)?[0] {
        0 => SetKind::Facts,
        1 => SetKind::QaPairs,
        k => return Err(CoverageIoError::BadCache(format!("unknown set kind {k}"))),
    };
    let model_len = u16::from_le_bytes(take(&bytes, &mut cursor, 2)?.try_into().unwrap()) as usize;
    let embed_model_id = String::from_utf8(take(&bytes, &mut cursor, model_len)?.to_vec())
        .map_err(|e| CoverageIoError::BadCache(e.to_string()))?;
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = u16::from_le_bytes(take(&bytes, &mut cursor, 2)?.try_into().unwrap()) as usize;
        let id = String::from_utf8(take(&bytes, &mut cursor, id_len)?.to_vec())
            .map_err(|e| CoverageIoError::BadCache(e.to_string()))?;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let raw = take(&bytes, &mut cursor, 4)?;
            values.push(f32::from_le_bytes(raw.try_into().unwrap()) as f64);
        }
        items.push((id, EmbeddingVector::new(values, embed_model_id.clone())));
    }
    Ok(EmbeddingSet {
        items,
        kind,
        embed_model_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockConfig;
    use factgen_core::qa::FactStatus;

    fn facts(n: usize) -> Vec<AtomicFact> {
        (0..n)
            .map(|i| AtomicFact {
                fact_id: format!("d:0:{i}"),
                text: format!("Fact number {i} records a distinct outcome."),
                section_index: 0,
                status: FactStatus::Accepted,
                triage_note: None,
            })
            .collect()
    }

    #[test]
    fn embed_facts_preserves_order_and_ids() {
        let gw = Gateway::mock(MockConfig::default());
        let set = embed_facts(&facts(4), &gw, "coverage").unwrap();
        assert_eq!(set.items.len(), 4);
        assert_eq!(set.items[2].0, "d:0:2");
        assert_eq!(set.kind, SetKind::Facts);
        assert_eq!(set.dim(), Some(16));
    }

    #[test]
    fn cache_round_trip_within_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::mock(MockConfig::default());
        let set = embed_facts(&facts(3), &gw, "coverage").unwrap();
        let path = dir.path().join("facts.emb");
        write_embedding_cache(&path, &set).unwrap();
        let loaded = read_embedding_cache(&path).unwrap();
        assert_eq!(loaded.items.len(), 3);
        assert_eq!(loaded.embed_model_id, set.embed_model_id);
        assert_eq!(loaded.kind, set.kind);
        for ((id_a, va), (id_b, vb)) in set.items.iter().zip(&loaded.items) {
            assert_eq!(id_a, id_b);
            for (x, y) in va.values.iter().zip(&vb.values) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn cache_write_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::mock(MockConfig::default());
        let set = embed_facts(&facts(2), &gw, "coverage").unwrap();
        let a = dir.path().join("a.emb");
        let b = dir.path().join("b.emb");
        write_embedding_cache(&a, &set).unwrap();
        write_embedding_cache(&b, &set).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn corrupt_cache_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.emb");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(
            read_embedding_cache(&path),
            Err(CoverageIoError::BadCache(_))
        ));
    }
}
