//! Deterministic core of a retrieval-augmented short-video rumor classifier.
//!
//! The crate covers the stages of the pipeline that are pure computation:
//!
//! - [`phash`] — DCT-based 64-bit perceptual hashing and sliding-window
//!   deduplication of frame and text-box streams.
//! - [`textfusion`] — Levenshtein distance and the two-pointer timestamp merge
//!   of audio-text and image-text streams.
//! - [`embed`] — cosine similarity/distance, normalization, segment pooling of
//!   frame features, and token-budget accounting.
//! - [`contrastive`] — contrastive loss with cosine distance, online hard-pair
//!   mining, analytic gradients, and desk-scale embedding training.
//! - [`hnsw`] — an HNSW proximity-graph index over normalized vectors with a
//!   brute-force kNN oracle.
//! - [`classifier`] — similarity-weighted top-k label voting and same-event
//!   retrieval evaluation.
//! - [`metrics`] — 3-class confusion matrix, accuracy/precision/recall/F1,
//!   rumor-positive ROC curve and AUC.
//! - [`pipeline`] — file formats, index persistence, and the CLI surface.
//!
//! The runnable examples under `examples/` demonstrate each capability; the
//! `rumorkit` binary ties them into an ingest → query → evaluate pipeline.

pub mod classifier;
pub mod contrastive;
pub mod embed;
pub mod hnsw;
pub mod metrics;
pub mod model;
pub mod phash;
pub mod pipeline;
pub mod textfusion;

pub use classifier::Prediction;
pub use hnsw::{HnswIndex, HnswParams};
pub use metrics::ConfusionMatrix3;
pub use model::{EmbeddingRecord, Label};
