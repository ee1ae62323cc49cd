//! Append-only run ledger: one JSON line per stage event, recording artifact
//! digests, gateway budget snapshots, and warnings. Every artifact on disk is
//! reachable from exactly one ledger entry.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gateway::StageBudget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub timestamp: String,
    /// artifact path (relative to the output root) -> content digest
    pub artifacts: BTreeMap<String, String>,
    pub budget: BTreeMap<String, StageBudget>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct RunLedger {
    path: PathBuf,
}

impl RunLedger {
    pub fn open(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            path: root.join("ledger.jsonl"),
        })
    }

    pub fn append(&self, entry: &LedgerEntry) -> std::io::Result<()> {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        file.write_all(&line)
    }

    pub fn entries(&self) -> std::io::Result<Vec<LedgerEntry>> {
        match std::fs::read_to_string(&self.path) {
            Ok(text) => text
                .lines()
                .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }
}
