//! File formats, persistence, configuration, and the command-line surface
//! tying ingestion, index build, query/classification, and evaluation
//! together.

mod cli;
mod config;
mod persist;
mod records;

pub use cli::{run_command, run_to_string};
pub use config::{BudgetConfig, DedupConfig, PipelineConfig};
pub use persist::{load_index, save_index, INDEX_FORMAT_VERSION};
pub use records::{
    load_frame_hashes, load_pairs, load_records, load_records_infer, load_timed_text,
    save_records,
};

use crate::classifier::ClassifierError;
use crate::contrastive::ContrastiveError;
use crate::hnsw::IndexError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::phash::PhashError;
use crate::textfusion::FusionError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    Record {
        path: PathBuf,
        line: usize,
        source: ModelError,
    },
    #[error("{path}:{line}: duplicate record id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt index file: {0}")]
    CorruptIndex(String),
    #[error("{path}: invalid config: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Contrastive(#[from] ContrastiveError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Phash(#[from] PhashError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
