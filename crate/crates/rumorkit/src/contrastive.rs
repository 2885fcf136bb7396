//! Contrastive loss over cosine distance, online hard-pair mining, analytic
//! gradients, and desk-scale gradient descent directly on stored vectors.
//!
//! With `d` the cosine distance of a pair, the loss is `d^2` for same-label
//! pairs and `max(0, margin - d)^2` for different-label pairs.

use crate::embed::{self, EmbedError};
use crate::model::EmbeddingRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContrastiveError {
    #[error("need at least two records to build pairs")]
    TooFewRecords,
    #[error("learning rate must be positive")]
    NonPositiveLearningRate,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Whether the two samples of a pair carry the same class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Different,
    Same,
}

impl PairLabel {
    pub fn code(self) -> u8 {
        match self {
            PairLabel::Different => 0,
            PairLabel::Same => 1,
        }
    }
}

impl Serialize for PairLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for PairLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match u8::deserialize(deserializer)? {
            0 => Ok(PairLabel::Different),
            1 => Ok(PairLabel::Same),
            other => Err(serde::de::Error::custom(format!(
                "pair_label must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// A training pair of embedding vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub pair_label: PairLabel,
}

impl SamplePair {
    pub fn new(a: Vec<f64>, b: Vec<f64>, pair_label: PairLabel) -> Result<Self, ContrastiveError> {
        if a.len() != b.len() {
            return Err(EmbedError::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            }
            .into());
        }
        Ok(Self { a, b, pair_label })
    }
}

/// Margin of the hinge on different-label pairs, in cosine-distance units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { margin: 0.5 }
    }
}

fn draw_pair_indices(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Draws `count` uniformly random pairs (no self-pairing); the pair label is 1
/// iff the two records share a class label. Deterministic for a fixed seed.
pub fn make_pairs(
    records: &[EmbeddingRecord],
    rng_seed: u64,
    count: usize,
) -> Result<Vec<SamplePair>, ContrastiveError> {
    if records.len() < 2 {
        return Err(ContrastiveError::TooFewRecords);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pairs = (0..count)
        .map(|_| {
            let (i, j) = draw_pair_indices(&mut rng, records.len());
            let pair_label = if records[i].label == records[j].label {
                PairLabel::Same
            } else {
                PairLabel::Different
            };
            SamplePair::new(
                records[i].vector.clone(),
                records[j].vector.clone(),
                pair_label,
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(pairs)
}

/// Contrastive loss of a single pair.
pub fn contrastive_loss(pair: &SamplePair, config: &LossConfig) -> Result<f64, ContrastiveError> {
    let d = embed::cosine_distance(&pair.a, &pair.b)?;
    Ok(match pair.pair_label {
        PairLabel::Same => d * d,
        PairLabel::Different => {
            let hinge = (config.margin - d).max(0.0);
            hinge * hinge
        }
    })
}

/// Analytic gradients of [`contrastive_loss`] with respect to both vectors.
///
/// Inside the clamped region of the hinge (different labels, `d >= margin`)
/// both gradients are zero; the subgradient at the kink `d == margin` is 0.
pub fn loss_gradient(
    pair: &SamplePair,
    config: &LossConfig,
) -> Result<(Vec<f64>, Vec<f64>), ContrastiveError> {
    let similarity = embed::cosine_similarity(&pair.a, &pair.b)?;
    let distance = 1.0 - similarity;
    // dL/dd, with the hinge's flat region short-circuited
    let dloss_ddistance = match pair.pair_label {
        PairLabel::Same => 2.0 * distance,
        PairLabel::Different => {
            if distance >= config.margin {
                return Ok((vec![0.0; pair.a.len()], vec![0.0; pair.b.len()]));
            }
            -2.0 * (config.margin - distance)
        }
    };
    let norm_a = embed::norm(&pair.a);
    let norm_b = embed::norm(&pair.b);
    // ds/da = b/(|a||b|) - s a/|a|^2, and dd/da = -ds/da
    let grad_a: Vec<f64> = pair
        .a
        .iter()
        .zip(&pair.b)
        .map(|(&ai, &bi)| {
            -dloss_ddistance * (bi / (norm_a * norm_b) - similarity * ai / (norm_a * norm_a))
        })
        .collect();
    let grad_b: Vec<f64> = pair
        .a
        .iter()
        .zip(&pair.b)
        .map(|(&ai, &bi)| {
            -dloss_ddistance * (ai / (norm_a * norm_b) - similarity * bi / (norm_b * norm_b))
        })
        .collect();
    Ok((grad_a, grad_b))
}

pub(crate) fn mine_hard_indices(
    batch: &[SamplePair],
    config: &LossConfig,
) -> Result<Vec<usize>, ContrastiveError> {
    let mut distances = Vec::with_capacity(batch.len());
    for pair in batch {
        distances.push(embed::cosine_distance(&pair.a, &pair.b)?);
    }
    let positive_max = batch
        .iter()
        .zip(&distances)
        .filter(|(p, _)| p.pair_label == PairLabel::Same)
        .map(|(_, &d)| d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.max(d))));
    let negative_min = batch
        .iter()
        .zip(&distances)
        .filter(|(p, _)| p.pair_label == PairLabel::Different)
        .map(|(_, &d)| d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.min(d))));

    let selected = batch
        .iter()
        .zip(&distances)
        .enumerate()
        .filter(|(_, (pair, &d))| match pair.pair_label {
            PairLabel::Different => match positive_max {
                Some(max_p) => d < max_p,
                None => d < config.margin,
            },
            PairLabel::Same => match negative_min {
                Some(min_n) => d > min_n,
                None => true,
            },
        })
        .map(|(index, _)| index)
        .collect();
    Ok(selected)
}

/// Keeps the hard cases of a batch: negatives closer than the farthest
/// positive and positives farther than the closest negative.
///
/// With no positives in the batch, negatives violating the margin are
/// returned; with no negatives, all positives are.
pub fn mine_hard_pairs(
    batch: &[SamplePair],
    config: &LossConfig,
) -> Result<Vec<SamplePair>, ContrastiveError> {
    Ok(mine_hard_indices(batch, config)?
        .into_iter()
        .map(|index| batch[index].clone())
        .collect())
}

/// Mean contrastive loss over the batch, or over the mined hard pairs when
/// `online` is set. An empty selection yields 0.
pub fn batch_loss(
    batch: &[SamplePair],
    config: &LossConfig,
    online: bool,
) -> Result<f64, ContrastiveError> {
    let selection;
    let pairs: &[SamplePair] = if online {
        selection = mine_hard_pairs(batch, config)?;
        &selection
    } else {
        batch
    };
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for pair in pairs {
        total += contrastive_loss(pair, config)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Result of [`train_embeddings`]: the updated records plus the online batch
/// loss before and after training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<EmbeddingRecord>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Pairs drawn per record for the training set.
const PAIRS_PER_RECORD: usize = 4;

/// Gradient descent with online hard-pair mining directly on the stored
/// vectors; vectors are re-normalized after every applied step.
///
/// The best iterate (by online batch loss over the fixed training pairs) is
/// returned, so the final loss never exceeds the initial one. Records whose
/// accumulated gradient is exactly zero are left untouched.
pub fn train_embeddings(
    records: &[EmbeddingRecord],
    config: &LossConfig,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TrainOutcome, ContrastiveError> {
    if records.len() < 2 {
        return Err(ContrastiveError::TooFewRecords);
    }
    if !(learning_rate > 0.0) {
        return Err(ContrastiveError::NonPositiveLearningRate);
    }
    let dim = records[0].vector.len();
    for record in records {
        if record.vector.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                left: dim,
                right: record.vector.len(),
            }
            .into());
        }
        if embed::norm(&record.vector) == 0.0 {
            return Err(EmbedError::ZeroNorm.into());
        }
    }

    // fixed training pairs, drawn once from the seed
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair_indices: Vec<(usize, usize, PairLabel)> = (0..records.len() * PAIRS_PER_RECORD)
        .map(|_| {
            let (i, j) = draw_pair_indices(&mut rng, records.len());
            let label = if records[i].label == records[j].label {
                PairLabel::Same
            } else {
                PairLabel::Different
            };
            (i, j, label)
        })
        .collect();

    let materialize = |vectors: &[Vec<f64>]| -> Vec<SamplePair> {
        pair_indices
            .iter()
            .map(|&(i, j, label)| SamplePair {
                a: vectors[i].clone(),
                b: vectors[j].clone(),
                pair_label: label,
            })
            .collect()
    };

    let mut vectors: Vec<Vec<f64>> = records.iter().map(|r| r.vector.clone()).collect();
    let initial_loss = batch_loss(&materialize(&vectors), config, true)?;
    let mut best_loss = initial_loss;
    let mut best_vectors = vectors.clone();

    for _ in 0..epochs {
        let batch = materialize(&vectors);
        let selected = mine_hard_indices(&batch, config)?;
        if selected.is_empty() {
            break;
        }
        let scale = 1.0 / selected.len() as f64;
        let mut gradients = vec![vec![0.0; dim]; records.len()];
        for &index in &selected {
            let (i, j, _) = pair_indices[index];
            let (grad_a, grad_b) = loss_gradient(&batch[index], config)?;
            for (g, v) in gradients[i].iter_mut().zip(&grad_a) {
                *g += v * scale;
            }
            for (g, v) in gradients[j].iter_mut().zip(&grad_b) {
                *g += v * scale;
            }
        }
        for (vector, gradient) in vectors.iter_mut().zip(&gradients) {
            if gradient.iter().all(|&g| g == 0.0) {
                continue;
            }
            let stepped: Vec<f64> = vector
                .iter()
                .zip(gradient)
                .map(|(v, g)| v - learning_rate * g)
                .collect();
            match embed::normalize(&stepped) {
                Ok(unit) => *vector = unit,
                Err(_) => continue, // degenerate step, keep the previous vector
            }
        }
        let loss = batch_loss(&materialize(&vectors), config, true)?;
        if loss < best_loss {
            best_loss = loss;
            best_vectors = vectors.clone();
        }
    }

    let records = records
        .iter()
        .zip(best_vectors)
        .map(|(record, vector)| EmbeddingRecord {
            vector,
            ..record.clone()
        })
        .collect();
    Ok(TrainOutcome {
        records,
        initial_loss,
        final_loss: best_loss,
    })
}
