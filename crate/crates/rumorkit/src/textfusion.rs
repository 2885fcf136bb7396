//! Levenshtein distance, normalized text similarity, and the two-pointer
//! timestamp merge of audio-text and image-text streams with edit-distance
//! deduplication.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A merge candidate is compared against already-merged statements whose start
/// lies within this many seconds.
pub const DEDUP_LOOKBACK_SECONDS: f64 = 30.0;

/// Default similarity above which an image-text candidate is dropped.
pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("{stream} stream is not sorted by start timestamp at element {index}")]
    UnsortedInput { stream: Stream, index: usize },
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Audio,
    Image,
}

impl std::fmt::Display for Stream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stream::Audio => write!(f, "audio"),
            Stream::Image => write!(f, "image"),
        }
    }
}

/// Which recognizer produced a text segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Audio,
    Image,
}

/// A text segment with its start/end timestamps in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedText {
    pub text: String,
    pub start: f64,
    pub end: f64,
    pub origin: Origin,
}

impl TimedText {
    pub fn new(
        text: impl Into<String>,
        start: f64,
        end: f64,
        origin: Origin,
    ) -> Result<Self, FusionError> {
        let text = text.into();
        if !start.is_finite() || !end.is_finite() || start < 0.0 || start > end {
            return Err(FusionError::InvalidSegment(format!(
                "timestamps must satisfy 0 <= start <= end, got [{start}, {end}]"
            )));
        }
        if text.is_empty() && origin == Origin::Audio {
            return Err(FusionError::InvalidSegment(
                "audio segments cannot be empty".into(),
            ));
        }
        Ok(Self {
            text,
            start,
            end,
            origin,
        })
    }
}

/// Minimum number of single-character insertions, deletions, and substitutions
/// transforming `a` into `b`, counted over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let source: Vec<char> = a.chars().collect();
    let target: Vec<char> = b.chars().collect();
    if source.is_empty() {
        return target.len();
    }
    if target.is_empty() {
        return source.len();
    }
    let mut distances: Vec<usize> = (0..=target.len()).collect();
    for (i, &cs) in source.iter().enumerate() {
        let mut diagonal = i;
        distances[0] = i + 1;
        for (j, &ct) in target.iter().enumerate() {
            let substitution = diagonal + usize::from(cs != ct);
            let next = substitution
                .min(distances[j] + 1)
                .min(distances[j + 1] + 1);
            diagonal = distances[j + 1];
            distances[j + 1] = next;
        }
    }
    distances[target.len()]
}

/// Normalized similarity `1 - levenshtein(a, b) / max(|a|, |b|)` in [0, 1];
/// defined as 1 when both strings are empty.
pub fn similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

fn check_sorted(segments: &[TimedText], stream: Stream) -> Result<(), FusionError> {
    for (index, pair) in segments.windows(2).enumerate() {
        if pair[1].start < pair[0].start {
            return Err(FusionError::UnsortedInput {
                stream,
                index: index + 1,
            });
        }
    }
    Ok(())
}

/// Merges the audio and image text streams by start timestamp (ties: audio
/// first) and drops image-text candidates that duplicate a recently merged
/// statement.
///
/// A candidate is compared against every already-merged statement whose start
/// lies within [`DEDUP_LOOKBACK_SECONDS`]; if any similarity reaches
/// `dedup_threshold` and the candidate came from the image stream, it is
/// dropped. Audio statements are never dropped.
pub fn merge_streams(
    audio: &[TimedText],
    image: &[TimedText],
    dedup_threshold: f64,
) -> Result<Vec<TimedText>, FusionError> {
    check_sorted(audio, Stream::Audio)?;
    check_sorted(image, Stream::Image)?;

    let mut merged: Vec<TimedText> = Vec::with_capacity(audio.len() + image.len());
    let push_candidate = |merged: &mut Vec<TimedText>, candidate: &TimedText| {
        let duplicate = candidate.origin == Origin::Image
            && merged
                .iter()
                .rev()
                .take_while(|prev| candidate.start - prev.start <= DEDUP_LOOKBACK_SECONDS)
                .any(|prev| similarity(&candidate.text, &prev.text) >= dedup_threshold);
        if !duplicate {
            merged.push(candidate.clone());
        }
    };

    let (mut ai, mut ii) = (0, 0);
    while ai < audio.len() && ii < image.len() {
        if audio[ai].start <= image[ii].start {
            push_candidate(&mut merged, &audio[ai]);
            ai += 1;
        } else {
            push_candidate(&mut merged, &image[ii]);
            ii += 1;
        }
    }
    for segment in &audio[ai..] {
        push_candidate(&mut merged, segment);
    }
    for segment in &image[ii..] {
        push_candidate(&mut merged, segment);
    }
    Ok(merged)
}

/// Joins segment texts with single spaces; the result is the video text.
pub fn concat_text(merged: &[TimedText]) -> String {
    merged
        .iter()
        .map(|segment| segment.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}
