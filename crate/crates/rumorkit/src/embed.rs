//! Vector arithmetic shared by the loss, the index, and the classifier, plus
//! segment pooling of frame-feature matrices and token-budget accounting for
//! the fusion input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("cannot pool {rows} frame rows into {m} tokens")]
    TooManyTokens { rows: usize, m: usize },
    #[error("pad target {target} is smaller than the current width {cols}")]
    TargetTooSmall { target: usize, cols: usize },
    #[error("token budget overflow: {m} video tokens leave no room in {total} positions")]
    BudgetOverflow { total: usize, m: usize },
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
}

/// Row-major matrix of per-frame feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FrameFeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, EmbedError> {
        if rows == 0 || cols == 0 {
            return Err(EmbedError::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(EmbedError::InvalidMatrix(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidMatrix(format!(
                "entry {i} is not finite"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Parses a whitespace-delimited text matrix, one row per line.
    pub fn from_text(text: &str) -> Result<Self, EmbedError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let row = row.map_err(|e| {
                EmbedError::InvalidMatrix(format!("line {}: {e}", lineno + 1))
            })?;
            rows.push(row);
        }
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(EmbedError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(n, cols, rows.concat())
    }
}

/// Allocation of transformer input positions between CLS/SEP, video tokens,
/// and text tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub total: usize,
    pub cls: usize,
    pub sep: usize,
    pub video_tokens: usize,
    pub text_tokens: usize,
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<(), EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity, clamped to [-1, 1] against floating-point drift.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    check_dims(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// 1 minus cosine similarity, in [0, 2].
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

pub fn normalize(v: &[f64]) -> Result<Vec<f64>, EmbedError> {
    let n = norm(v);
    if n == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Average-pools the rows of `features` into `m` contiguous segments whose
/// sizes differ by at most one, larger segments first.
pub fn segment_pool(features: &FrameFeatureMatrix, m: usize) -> Result<FrameFeatureMatrix, EmbedError> {
    if m == 0 || m > features.rows {
        return Err(EmbedError::TooManyTokens {
            rows: features.rows,
            m,
        });
    }
    let base = features.rows / m;
    let remainder = features.rows % m;
    let mut data = Vec::with_capacity(m * features.cols);
    let mut start = 0;
    for segment in 0..m {
        let size = base + usize::from(segment < remainder);
        let mut acc = vec![0.0; features.cols];
        for r in start..start + size {
            for (a, v) in acc.iter_mut().zip(features.row(r)) {
                *a += v;
            }
        }
        data.extend(acc.into_iter().map(|v| v / size as f64));
        start += size;
    }
    FrameFeatureMatrix::new(m, features.cols, data)
}

/// Zero-pads every row on the right from `cols` to `target` columns.
pub fn pad_width(matrix: &FrameFeatureMatrix, target: usize) -> Result<FrameFeatureMatrix, EmbedError> {
    if target < matrix.cols {
        return Err(EmbedError::TargetTooSmall {
            target,
            cols: matrix.cols,
        });
    }
    let mut data = Vec::with_capacity(matrix.rows * target);
    for r in 0..matrix.rows {
        data.extend_from_slice(matrix.row(r));
        data.extend(std::iter::repeat(0.0).take(target - matrix.cols));
    }
    FrameFeatureMatrix::new(matrix.rows, target, data)
}

/// Splits `total` input positions into one CLS, one SEP, `m` video tokens, and
/// the remaining text tokens.
pub fn make_budget(total: usize, m: usize) -> Result<TokenBudget, EmbedError> {
    if total < 2 || m == 0 || m > total - 2 {
        return Err(EmbedError::BudgetOverflow { total, m });
    }
    Ok(TokenBudget {
        total,
        cls: 1,
        sep: 1,
        video_tokens: m,
        text_tokens: total - 2 - m,
    })
}
