//! IO, network, and file-format companion to `factgen-core`: article
//! ingestion, the LLM gateway, dataset synthesis drivers, coverage and
//! retrieval persistence, evaluation runs, and the CLI surface.

pub mod config;
pub mod coverage_io;
pub mod eval;
pub mod gateway;
pub mod ingest;
pub mod ledger;
pub mod pipeline;
pub mod prompts;
pub mod rag;
pub mod report;
pub mod synthesis;
