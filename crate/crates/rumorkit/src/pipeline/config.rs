//! Pipeline defaults and the JSON config file; command-line flags override
//! whatever the file sets.

use super::PipelineError;
use crate::contrastive::LossConfig;
use crate::hnsw::HnswParams;
use crate::phash;
use crate::textfusion;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Sliding-window deduplication settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub frame_window: usize,
    pub textbox_window: usize,
    pub hamming_threshold: u32,
    pub text_similarity_threshold: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            frame_window: phash::FRAME_WINDOW,
            textbox_window: phash::TEXTBOX_WINDOW,
            hamming_threshold: phash::SIMILARITY_THRESHOLD,
            text_similarity_threshold: textfusion::DEFAULT_DEDUP_THRESHOLD,
        }
    }
}

/// Fusion-input token allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetConfig {
    pub total: usize,
    pub m: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { total: 512, m: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Corpus vector dimension; inferred from the first record when absent.
    pub dim: Option<usize>,
    /// Neighbors consulted per query.
    pub k: usize,
    pub hnsw: HnswParams,
    pub loss: LossConfig,
    pub dedup: DedupConfig,
    pub budget: BudgetConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dim: None,
            k: crate::classifier::DEFAULT_TOP_K,
            hnsw: HnswParams::default(),
            loss: LossConfig::default(),
            dedup: DedupConfig::default(),
            budget: BudgetConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        config.hnsw.validate()?;
        Ok(config)
    }
}
