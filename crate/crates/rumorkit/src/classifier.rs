//! Similarity-weighted top-k label voting over index results, the rumor score
//! used for ROC analysis, and same-event retrieval evaluation.

use crate::hnsw::{HnswIndex, IndexError};
use crate::model::{EmbeddingRecord, Label};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Neighbors consulted per query unless overridden.
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("query record {id:?} has no event tag")]
    MissingEventTag { id: String },
    #[error("no queries to evaluate")]
    EmptyQuerySet,
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// One retrieved neighbor with its contribution to the vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub label: Label,
    pub similarity: f64,
}

/// Outcome of classifying one query vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Summed non-negative cosine similarity per label code.
    pub weights: [f64; 3],
    /// Normalized rumor vote weight; 1/3 when no neighbor contributes.
    pub rumor_score: f64,
    pub neighbors: Vec<Neighbor>,
}

/// Accumulates per-label vote weights from ranked neighbors.
///
/// Negative similarities are clamped to zero so a far neighbor cannot veto a
/// label; the winning label is the argmax with ties broken toward the lowest
/// label code.
pub fn tally_votes(neighbors: &[Neighbor]) -> Prediction {
    let mut weights = [0.0f64; 3];
    for neighbor in neighbors {
        weights[neighbor.label.code() as usize] += neighbor.similarity.max(0.0);
    }
    let mut label = Label::NonRumor;
    for candidate in Label::ALL {
        if weights[candidate.code() as usize] > weights[label.code() as usize] {
            label = candidate;
        }
    }
    let total: f64 = weights.iter().sum();
    let rumor_score = if total > 0.0 {
        weights[Label::Rumor.code() as usize] / total
    } else {
        1.0 / 3.0
    };
    Prediction {
        label,
        weights,
        rumor_score,
        neighbors: neighbors.to_vec(),
    }
}

/// Classifies a query vector from its top-k neighborhood in the index.
pub fn predict(index: &HnswIndex, query: &[f64], k: usize) -> Result<Prediction, ClassifierError> {
    let hits = index.search_knn(query, k)?;
    let neighbors: Vec<Neighbor> = hits
        .into_iter()
        .map(|(id, similarity)| {
            let label = index
                .label_of(&id)
                .expect("search results always reference stored nodes");
            Neighbor {
                id,
                label,
                similarity,
            }
        })
        .collect();
    Ok(tally_votes(&neighbors))
}

/// Fraction of queries whose top-k neighborhood (excluding the query's own id)
/// contains at least one record with the same event tag.
pub fn evaluate_retrieval(
    index: &HnswIndex,
    queries: &[EmbeddingRecord],
    k: usize,
) -> Result<f64, ClassifierError> {
    if queries.is_empty() {
        return Err(ClassifierError::EmptyQuerySet);
    }
    let mut hits = 0usize;
    for query in queries {
        let event = query
            .event
            .as_deref()
            .ok_or_else(|| ClassifierError::MissingEventTag {
                id: query.id.clone(),
            })?;
        // one extra result absorbs the query's own entry before truncation
        let results = index.search_knn(&query.vector, k + 1)?;
        let found = results
            .iter()
            .filter(|(id, _)| id != &query.id)
            .take(k)
            .any(|(id, _)| index.event_of(id) == Some(event));
        if found {
            hits += 1;
        }
    }
    Ok(hits as f64 / queries.len() as f64)
}
