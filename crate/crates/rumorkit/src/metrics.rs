//! Three-class confusion matrix with accuracy / macro precision / macro recall
//! / F1, plus the rumor-positive ROC curve and AUC.
//!
//! Precision averages the three per-column terms and recall the three per-row
//! terms with equal weight; F1 is composed from the macro precision and macro
//! recall values (not averaged from per-class F1s). A 0/0 class term
//! contributes 0 to its average.

use crate::model::Label;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("ROC requires at least one positive and one negative sample")]
    DegenerateLabels,
    #[error("malformed ROC curve: {0}")]
    MalformedCurve(String),
}

/// Counts `F[i][j]`: samples with actual label `i` predicted as `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix3 {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix3 {
    pub fn record(&mut self, actual: Label, predicted: Label) {
        self.counts[actual.code() as usize][predicted.code() as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn require_non_empty(&self) -> Result<u64, MetricsError> {
        match self.total() {
            0 => Err(MetricsError::EmptyMatrix),
            n => Ok(n),
        }
    }
}

/// Tallies (actual, predicted) pairs into a confusion matrix.
pub fn accumulate(pairs: &[(Label, Label)]) -> ConfusionMatrix3 {
    let mut matrix = ConfusionMatrix3::default();
    for &(actual, predicted) in pairs {
        matrix.record(actual, predicted);
    }
    matrix
}

/// Fraction of correctly predicted samples: the diagonal over the total.
pub fn accuracy(matrix: &ConfusionMatrix3) -> Result<f64, MetricsError> {
    let n = matrix.require_non_empty()?;
    let diagonal: u64 = (0..3).map(|i| matrix.counts[i][i]).sum();
    Ok(diagonal as f64 / n as f64)
}

// 0/0 contributes 0 to the three-term average.
fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Mean over classes of `F[j][j]` divided by the column sum.
pub fn macro_precision(matrix: &ConfusionMatrix3) -> Result<f64, MetricsError> {
    matrix.require_non_empty()?;
    let sum: f64 = (0..3)
        .map(|j| {
            let column: u64 = (0..3).map(|i| matrix.counts[i][j]).sum();
            ratio(matrix.counts[j][j], column)
        })
        .sum();
    Ok(sum / 3.0)
}

/// Mean over classes of `F[i][i]` divided by the row sum.
pub fn macro_recall(matrix: &ConfusionMatrix3) -> Result<f64, MetricsError> {
    matrix.require_non_empty()?;
    let sum: f64 = (0..3)
        .map(|i| {
            let row: u64 = matrix.counts[i].iter().sum();
            ratio(matrix.counts[i][i], row)
        })
        .sum();
    Ok(sum / 3.0)
}

/// Harmonic mean of the macro precision and macro recall; 0 when both are 0.
pub fn f1(matrix: &ConfusionMatrix3) -> Result<f64, MetricsError> {
    let precision = macro_precision(matrix)?;
    let recall = macro_recall(matrix)?;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// One ROC sweep point; `threshold` is the lowest score still classified
/// positive at this point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Infinite at the (0, 0) endpoint, which JSON renders as `null`.
    #[serde(with = "nullable_infinity")]
    pub threshold: f64,
}

mod nullable_infinity {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else {
            serializer.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::INFINITY))
    }
}

/// Rumor-positive binarization: rumor videos are positive, non-rumor and
/// debunking videos are negative.
pub fn is_positive(label: Label) -> bool {
    label == Label::Rumor
}

/// ROC curve swept over each distinct score, descending; tied scores move
/// together. Starts at (0, 0) and ends at (1, 1).
pub fn roc_curve(scored: &[(f64, Label)]) -> Result<Vec<RocPoint>, MetricsError> {
    let positives = scored.iter().filter(|(_, l)| is_positive(*l)).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut true_positives = 0u64;
    let mut false_positives = 0u64;
    let mut i = 0;
    while i < order.len() {
        let threshold = scored[order[i]].0;
        // consume the whole tie group before emitting a point
        while i < order.len() && scored[order[i]].0 == threshold {
            if is_positive(scored[order[i]].1) {
                true_positives += 1;
            } else {
                false_positives += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: false_positives as f64 / negatives as f64,
            tpr: true_positives as f64 / positives as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Area under an ROC curve by the trapezoidal rule.
pub fn auc(points: &[RocPoint]) -> Result<f64, MetricsError> {
    if points.len() < 2 {
        return Err(MetricsError::MalformedCurve("fewer than two points".into()));
    }
    let first = points.first().unwrap();
    let last = points.last().unwrap();
    if first.fpr != 0.0 || first.tpr != 0.0 {
        return Err(MetricsError::MalformedCurve(
            "curve does not start at (0, 0)".into(),
        ));
    }
    if last.fpr != 1.0 || last.tpr != 1.0 {
        return Err(MetricsError::MalformedCurve(
            "curve does not end at (1, 1)".into(),
        ));
    }
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(0.0..=1.0).contains(&b.fpr) || !(0.0..=1.0).contains(&b.tpr) || b.fpr < a.fpr {
            return Err(MetricsError::MalformedCurve(format!(
                "invalid step ({}, {}) -> ({}, {})",
                a.fpr, a.tpr, b.fpr, b.tpr
            )));
        }
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    Ok(area)
}

/// Full evaluation report for a classified test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
}

impl MetricsReport {
    pub fn from_results(
        matrix: &ConfusionMatrix3,
        scored: &[(f64, Label)],
    ) -> Result<Self, MetricsError> {
        let roc = roc_curve(scored)?;
        Ok(Self {
            accuracy: accuracy(matrix)?,
            precision: macro_precision(matrix)?,
            recall: macro_recall(matrix)?,
            f1: f1(matrix)?,
            auc: auc(&roc)?,
            roc,
        })
    }

    /// Aligned plain-text rendering of the headline metrics.
    pub fn to_table(&self) -> String {
        let rows = [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("auc", self.auc),
        ];
        let mut table = String::from("metric     value\n");
        for (name, value) in rows {
            table.push_str(&format!("{name:<10} {value:.5}\n"));
        }
        table
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_table())
    }
}
