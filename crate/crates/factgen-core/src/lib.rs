//! Algorithmic core for synthetic Q&A dataset scaling and its analysis.
//!
//! Everything in this crate is pure computation over owned data: completion
//! parsing, token counting, dataset carving, cosine-similarity coverage,
//! BM25/RRF retrieval scoring, and the accuracy statistics. IO, network
//! traffic, and file formats live in the companion `factgen` crate.
//!
//! The crate is `no_std` with `alloc` so the scoring and carving logic can be
//! embedded anywhere; tests link `std` as usual.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clean;
pub mod coverage;
pub mod embed;
pub mod qa;
pub mod retrieval;
pub mod scaling;
pub mod stats;
pub mod tokenize;

pub use clean::{CleanPolicy, DocSection, DropReason, RawSection};
pub use coverage::{AssignmentMatrix, CoverageReport, EmbeddingSet, SetKind};
pub use embed::{cosine_similarity, EmbeddingVector, SimilarityError};
pub use qa::{AtomicFact, FactStatus, Origin, QAPair, QuestionBank};
pub use scaling::{DatasetManifest, DatasetSpec, Mode, SectionTrace};
pub use tokenize::{BpeVocab, Tokenizer, TokenizerSpecInfo};
