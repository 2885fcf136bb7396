//! Shared domain types: the 3-way label vocabulary, embedding records, and
//! record validation used by every other module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("vector has {actual} dimensions, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector component {index} is not finite")]
    NonFiniteComponent { index: usize },
    #[error("record id is empty")]
    EmptyId,
    #[error("invalid label code {0}: must be 0 (non-rumor), 1 (rumor), or 2 (debunk)")]
    InvalidLabel(u8),
}

/// Classification label. The pipeline is hard-wired to exactly three classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Label {
    NonRumor = 0,
    Rumor = 1,
    Debunk = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::NonRumor, Label::Rumor, Label::Debunk];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, ModelError> {
        match code {
            0 => Ok(Label::NonRumor),
            1 => Ok(Label::Rumor),
            2 => Ok(Label::Debunk),
            other => Err(ModelError::InvalidLabel(other)),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        Label::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// One embedded sample: the unit stored in, indexed by, and retrieved from the
/// knowledge store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: Label,
    /// Topic/event identity, used only by retrieval evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    /// Provenance of knowledge entries (e.g. the platform an article came from).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, label: Label, vector: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            label,
            event: None,
            source: None,
            vector,
        }
    }

    pub fn with_event(mut self, event: impl Into<String>) -> Self {
        self.event = Some(event.into());
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}

/// Per-label record counts for a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub non_rumor: usize,
    pub rumor: usize,
    pub debunk: usize,
    pub total: usize,
}

impl DatasetSummary {
    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::NonRumor => self.non_rumor,
            Label::Rumor => self.rumor,
            Label::Debunk => self.debunk,
        }
    }
}

/// Checks a record against the corpus-wide invariants and returns it unchanged.
pub fn validate_record(
    record: EmbeddingRecord,
    expected_dim: usize,
) -> Result<EmbeddingRecord, ModelError> {
    assert!(expected_dim > 0, "expected_dim must be positive");
    if record.id.is_empty() {
        return Err(ModelError::EmptyId);
    }
    if record.vector.len() != expected_dim {
        return Err(ModelError::DimensionMismatch {
            expected: expected_dim,
            actual: record.vector.len(),
        });
    }
    if let Some(index) = record.vector.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteComponent { index });
    }
    Ok(record)
}

/// Tallies per-label counts over a record sequence.
pub fn summarize(records: &[EmbeddingRecord]) -> DatasetSummary {
    let mut summary = DatasetSummary {
        non_rumor: 0,
        rumor: 0,
        debunk: 0,
        total: records.len(),
    };
    for record in records {
        match record.label {
            Label::NonRumor => summary.non_rumor += 1,
            Label::Rumor => summary.rumor += 1,
            Label::Debunk => summary.debunk += 1,
        }
    }
    summary
}
