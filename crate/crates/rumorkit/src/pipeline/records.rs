//! JSON Lines readers and writers for the pipeline's record streams. Every
//! error carries the file path and the 1-based line number.

use super::PipelineError;
use crate::contrastive::SamplePair;
use crate::model::{validate_record, EmbeddingRecord};
use crate::phash::FrameHash;
use crate::textfusion::TimedText;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| (i + 1, line.to_string()))
        .collect())
}

fn parse_error(path: &Path, line: usize, message: impl ToString) -> PipelineError {
    PipelineError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

/// Loads embedding records, validating every line against `expected_dim`.
pub fn load_records(path: &Path, expected_dim: usize) -> Result<Vec<EmbeddingRecord>, PipelineError> {
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (line, text) in read_lines(path)? {
        let record: EmbeddingRecord =
            serde_json::from_str(&text).map_err(|e| parse_error(path, line, e))?;
        let record = validate_record(record, expected_dim).map_err(|source| {
            PipelineError::Record {
                path: path.to_path_buf(),
                line,
                source,
            }
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(PipelineError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Loads records taking the corpus dimension from the first line.
pub fn load_records_infer(path: &Path) -> Result<(Vec<EmbeddingRecord>, usize), PipelineError> {
    let lines = read_lines(path)?;
    let Some((first_line, first_text)) = lines.first() else {
        return Err(parse_error(path, 1, "file contains no records"));
    };
    let first: EmbeddingRecord =
        serde_json::from_str(first_text).map_err(|e| parse_error(path, *first_line, e))?;
    let dim = first.vector.len();
    let records = load_records(path, dim)?;
    Ok((records, dim))
}

/// Writes records as JSON Lines.
pub fn save_records(path: &Path, records: &[EmbeddingRecord]) -> Result<(), PipelineError> {
    let mut file = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| parse_error(path, 0, format!("serialization failed: {e}")))?;
        writeln!(file, "{line}").map_err(|e| PipelineError::io(path, e))?;
    }
    Ok(())
}

/// Loads contrastive training pairs: `{"a", "b", "pair_label"}` per line.
pub fn load_pairs(path: &Path) -> Result<Vec<SamplePair>, PipelineError> {
    let mut pairs = Vec::new();
    for (line, text) in read_lines(path)? {
        let raw: SamplePair = serde_json::from_str(&text).map_err(|e| parse_error(path, line, e))?;
        let pair = SamplePair::new(raw.a, raw.b, raw.pair_label)
            .map_err(|e| parse_error(path, line, e))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Loads a hash stream: `{"hash", "index", "timestamp"}` per line, with the
/// hash hex-encoded. Timestamps must be non-decreasing.
pub fn load_frame_hashes(path: &Path) -> Result<Vec<FrameHash>, PipelineError> {
    let mut frames: Vec<FrameHash> = Vec::new();
    for (line, text) in read_lines(path)? {
        let frame: FrameHash = serde_json::from_str(&text).map_err(|e| parse_error(path, line, e))?;
        if !frame.timestamp.is_finite() || frame.timestamp < 0.0 {
            return Err(parse_error(path, line, "timestamp must be non-negative"));
        }
        if let Some(prev) = frames.last() {
            if frame.timestamp < prev.timestamp {
                return Err(parse_error(
                    path,
                    line,
                    format!(
                        "timestamps must be non-decreasing ({} after {})",
                        frame.timestamp, prev.timestamp
                    ),
                ));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Loads a timed-text stream: `{"text", "start", "end", "origin"}` per line.
pub fn load_timed_text(path: &Path) -> Result<Vec<TimedText>, PipelineError> {
    let mut segments = Vec::new();
    for (line, text) in read_lines(path)? {
        let raw: TimedText = serde_json::from_str(&text).map_err(|e| parse_error(path, line, e))?;
        let segment = TimedText::new(raw.text, raw.start, raw.end, raw.origin)
            .map_err(|e| parse_error(path, line, e))?;
        segments.push(segment);
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn loads_well_formed_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "records.jsonl",
            r#"{"id":"a","label":0,"vector":[1.0,0.0]}
{"id":"b","label":1,"vector":[0.0,1.0],"event":"e1"}

{"id":"c","label":2,"vector":[0.5,0.5],"source":"kb"}
"#,
        );
        let records = load_records(&path, 2).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[1].event.as_deref(), Some("e1"));
        assert_eq!(records[2].source.as_deref(), Some("kb"));
        let (inferred, dim) = load_records_infer(&path).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(inferred, records);
    }

    #[test]
    fn dimension_error_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "records.jsonl",
            r#"{"id":"a","label":0,"vector":[1.0,0.0]}
{"id":"b","label":1,"vector":[1.0]}
"#,
        );
        match load_records(&path, 2) {
            Err(PipelineError::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected record error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "records.jsonl",
            r#"{"id":"a","label":0,"vector":[1.0]}
{"id":"a","label":1,"vector":[2.0]}
"#,
        );
        match load_records(&path, 1) {
            Err(PipelineError::DuplicateId { line, id, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "a");
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "records.jsonl",
            "{\"id\":\"a\",\"label\":0,\"vector\":[1.0]}\nnot json\n",
        );
        match load_records(&path, 1) {
            Err(PipelineError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_reports_the_path() {
        let message = load_records(Path::new("/nonexistent/records.jsonl"), 2)
            .unwrap_err()
            .to_string();
        assert!(message.contains("/nonexistent/records.jsonl"));
    }

    #[test]
    fn records_round_trip_through_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let records = vec![
            EmbeddingRecord::new("a", Label::Rumor, vec![0.25, -1.0]).with_event("e"),
            EmbeddingRecord::new("b", Label::Debunk, vec![0.5, 2.0]),
        ];
        save_records(&path, &records).unwrap();
        assert_eq!(load_records(&path, 2).unwrap(), records);
    }

    #[test]
    fn frame_hash_stream_requires_monotone_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "hashes.jsonl",
            r#"{"hash":"00000000000000ff","index":0,"timestamp":0.0}
{"hash":"ffffffffffffffff","index":1,"timestamp":1.0}
"#,
        );
        let frames = load_frame_hashes(&path).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].hash, 0xff);

        let bad = write_file(
            &dir,
            "bad.jsonl",
            r#"{"hash":"00","index":0,"timestamp":5.0}
{"hash":"01","index":1,"timestamp":1.0}
"#,
        );
        assert!(matches!(
            load_frame_hashes(&bad),
            Err(PipelineError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn timed_text_stream_validates_segments() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "text.jsonl",
            r#"{"text":"hello","start":0.0,"end":1.0,"origin":"audio"}
{"text":"world","start":2.0,"end":1.0,"origin":"image"}
"#,
        );
        assert!(matches!(
            load_timed_text(&path),
            Err(PipelineError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn pairs_stream_parses_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "pairs.jsonl",
            r#"{"a":[1.0,0.0],"b":[0.0,1.0],"pair_label":0}
{"a":[1.0,0.0],"b":[1.0,0.1],"pair_label":1}
"#,
        );
        let pairs = load_pairs(&path).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].pair_label.code(), 0);
        assert_eq!(pairs[1].pair_label.code(), 1);
    }
}
