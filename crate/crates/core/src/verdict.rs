//! Pass/fail verdict blocks: the JSON unit every check emits, aggregated by
//! the CLI into a run manifest.

use std::collections::BTreeMap;

/// One named check outcome with its metrics. `BTreeMap` keeps JSON key
/// order stable across runs.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CheckVerdict {
    pub name: String,
    pub pass: bool,
    /// Informational verdicts never affect exit status.
    pub gating: bool,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    pub notes: Vec<String>,
}

impl CheckVerdict {
    pub fn new(name: &str, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            pass,
            gating: true,
            metrics: BTreeMap::new(),
            seeds: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn metric(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metrics.insert(key.to_string(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seeds.push(seed);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn notes(mut self, notes: &[String]) -> Self {
        self.notes.extend_from_slice(notes);
        self
    }
}
