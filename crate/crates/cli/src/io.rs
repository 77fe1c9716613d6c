//! Line-delimited JSON persistence for every artifact the pipeline touches:
//! caption files, run traces, fine-tune exports, evaluation inputs, and mock
//! scripts. Parse errors always carry the offending line number.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sumforge_core::corpus::{Caption, CaptionSet, CorpusError, FinetuneRecord, SegmentWindow};
use sumforge_core::gateway::{MockScript, Role, ScriptEntry};
use sumforge_core::metaprompt::{IterationRecord, MetaRunTrace};
use sumforge_core::metrics::{tokenize, EvalPair, MetricsError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("predictions and references disagree: {0}")]
    EvalMismatch(String),
}

fn file_error(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

/// Reads one JSON record per line, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(|e| file_error(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| file_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes one JSON record per line, replacing any existing file.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| file_error(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(b"\n").map_err(|e| file_error(path, e))?;
    }
    writer.flush().map_err(|e| file_error(path, e))?;
    Ok(())
}

/// One caption-file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub video_id: String,
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub caption: String,
}

impl CaptionRecord {
    pub fn into_caption(self) -> Caption {
        Caption {
            window: SegmentWindow {
                video_id: self.video_id,
                index: self.index,
                start_s: self.start_s,
                end_s: self.end_s,
            },
            text: self.caption,
        }
    }

    pub fn from_caption(caption: &Caption) -> Self {
        Self {
            video_id: caption.window.video_id.clone(),
            index: caption.window.index,
            start_s: caption.window.start_s,
            end_s: caption.window.end_s,
            caption: caption.text.clone(),
        }
    }
}

/// Loads and validates every video in a caption file. Videos keep their
/// first-appearance order; captions are sorted by index per video before
/// validation.
pub fn load_caption_file(path: &Path) -> Result<Vec<CaptionSet>, IoError> {
    let records: Vec<CaptionRecord> = read_jsonl(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Caption>> = BTreeMap::new();
    for record in records {
        if !grouped.contains_key(&record.video_id) {
            order.push(record.video_id.clone());
        }
        grouped
            .entry(record.video_id.clone())
            .or_default()
            .push(record.into_caption());
    }
    let mut sets = Vec::with_capacity(order.len());
    for video_id in order {
        let mut captions = grouped.remove(&video_id).expect("grouped by construction");
        captions.sort_by_key(|c| c.window.index);
        sets.push(CaptionSet::from_captions(video_id, captions)?);
    }
    Ok(sets)
}

/// Writes caption sets back out, one record per caption line.
pub fn save_caption_file(path: &Path, sets: &[CaptionSet]) -> Result<(), IoError> {
    let records: Vec<CaptionRecord> = sets
        .iter()
        .flat_map(|set| set.captions().iter().map(CaptionRecord::from_caption))
        .collect();
    write_jsonl(path, &records)
}

/// Loads a fine-tune export, validating every record.
pub fn load_finetune_file(path: &Path) -> Result<Vec<FinetuneRecord>, IoError> {
    let records: Vec<FinetuneRecord> = read_jsonl(path)?;
    for record in &records {
        record.validate()?;
    }
    Ok(records)
}

/// One mock-script line. `fail_times` makes the keyed response fail that
/// many attempts with a transient error before answering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScriptRecord {
    pub role: Role,
    pub video_id: String,
    pub iteration: u32,
    pub response: String,
    #[serde(default)]
    pub fail_times: u32,
}

pub fn load_mock_script(
    path: &Path,
    default_response: Option<&str>,
) -> Result<MockScript, IoError> {
    let records: Vec<MockScriptRecord> = read_jsonl(path)?;
    let mut script = match default_response {
        Some(text) => MockScript::with_default(text),
        None => MockScript::new(),
    };
    for record in records {
        script.insert_entry(
            record.role,
            &record.video_id,
            record.iteration,
            ScriptEntry {
                response: record.response,
                fail_times: record.fail_times,
            },
        );
    }
    Ok(script)
}

/// One line of a per-video working trace file: either a completed iteration
/// or the finalised trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Iteration(IterationRecord),
    Final(MetaRunTrace),
}

/// What a working trace file holds after a (possibly interrupted) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFileState {
    pub iterations: Vec<IterationRecord>,
    pub final_trace: Option<MetaRunTrace>,
}

pub fn read_trace_file(path: &Path) -> Result<TraceFileState, IoError> {
    let lines: Vec<TraceLine> = read_jsonl(path)?;
    let mut iterations = Vec::new();
    let mut final_trace = None;
    for line in lines {
        match line {
            TraceLine::Iteration(record) => iterations.push(record),
            TraceLine::Final(trace) => final_trace = Some(trace),
        }
    }
    Ok(TraceFileState {
        iterations,
        final_trace,
    })
}

/// Append-mode writer for a single video's working trace file. Each record
/// is flushed immediately so an interrupted run can resume.
pub struct TraceFileWriter {
    writer: BufWriter<File>,
    path: std::path::PathBuf,
}

impl TraceFileWriter {
    /// Opens for appending, optionally truncating first (used when a resumed
    /// run rewrites the retained iterations).
    pub fn open(path: &Path, truncate: bool) -> Result<Self, IoError> {
        let file = OpenOptions::new()
            .create(true)
            .append(!truncate)
            .write(true)
            .truncate(truncate)
            .open(path)
            .map_err(|e| file_error(path, e))?;
        Ok(Self {
            writer: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, line: &TraceLine) -> Result<(), IoError> {
        serde_json::to_writer(&mut self.writer, line).map_err(|e| IoError::Parse {
            path: self.path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        self.writer
            .write_all(b"\n")
            .map_err(|e| file_error(&self.path, e))?;
        self.writer.flush().map_err(|e| file_error(&self.path, e))?;
        Ok(())
    }
}

/// One prediction line of the `evaluate` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item_id: String,
    pub text: String,
}

/// One reference line of the `evaluate` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub item_id: String,
    pub texts: Vec<String>,
}

/// Joins prediction and reference files into evaluation pairs, in prediction
/// order. Every prediction must have references; duplicates are rejected.
pub fn load_eval_pairs(
    predictions_path: &Path,
    references_path: &Path,
) -> Result<Vec<EvalPair>, IoError> {
    let predictions: Vec<PredictionRecord> = read_jsonl(predictions_path)?;
    let references: Vec<ReferenceRecord> = read_jsonl(references_path)?;
    let mut by_id: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for record in references {
        if by_id.insert(record.item_id.clone(), record.texts).is_some() {
            return Err(IoError::EvalMismatch(format!(
                "duplicate references for item {}",
                record.item_id
            )));
        }
    }
    let mut pairs = Vec::with_capacity(predictions.len());
    let mut seen = std::collections::BTreeSet::new();
    for prediction in predictions {
        if !seen.insert(prediction.item_id.clone()) {
            return Err(IoError::EvalMismatch(format!(
                "duplicate prediction for item {}",
                prediction.item_id
            )));
        }
        let texts = by_id.remove(&prediction.item_id).ok_or_else(|| {
            IoError::EvalMismatch(format!("no references for item {}", prediction.item_id))
        })?;
        let references = texts.iter().map(|t| tokenize(t)).collect();
        pairs.push(EvalPair::new(
            &prediction.item_id,
            tokenize(&prediction.text),
            references,
        )?);
    }
    Ok(pairs)
}

/// Turns a video id into a filesystem-safe file stem: alphanumerics, `-`,
/// `.` and `_` pass through, everything else becomes `_xx` hex.
pub fn safe_file_stem(video_id: &str) -> String {
    let mut out = String::with_capacity(video_id.len());
    for byte in video_id.bytes() {
        match byte {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'-' | b'.' | b'_' => out.push(byte as char),
            other => out.push_str(&format!("_{other:02x}")),
        }
    }
    if out.is_empty() {
        out.push_str("_empty");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(dir: &tempfile::TempDir, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        path
    }

    #[test]
    fn well_formed_caption_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "caps.jsonl",
            &[
                r#"{"video_id":"v1","index":0,"start_s":0.0,"end_s":180.0,"caption":"a"}"#,
                r#"{"video_id":"v1","index":1,"start_s":180.0,"end_s":360.0,"caption":"b"}"#,
                r#"{"video_id":"v1","index":2,"start_s":360.0,"end_s":520.0,"caption":"c"}"#,
            ],
        );
        let sets = load_caption_file(&path).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].segment_count(), 3);
        assert_eq!(sets[0].duration_s(), 520.0);
    }

    #[test]
    fn overlapping_windows_are_rejected_with_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "caps.jsonl",
            &[
                r#"{"video_id":"v1","index":0,"start_s":0.0,"end_s":180.0,"caption":"a"}"#,
                r#"{"video_id":"v1","index":1,"start_s":170.0,"end_s":350.0,"caption":"b"}"#,
            ],
        );
        let err = load_caption_file(&path).unwrap_err();
        assert!(
            err.to_string().contains("0") && err.to_string().contains("1"),
            "error should name indices: {err}"
        );
    }

    #[test]
    fn empty_caption_text_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "caps.jsonl",
            &[r#"{"video_id":"v1","index":0,"start_s":0.0,"end_s":180.0,"caption":""}"#],
        );
        assert!(load_caption_file(&path).is_err());
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "caps.jsonl",
            &[
                r#"{"video_id":"v1","index":0,"start_s":0.0,"end_s":180.0,"caption":"a"}"#,
                r#"{"video_id":"v1",BROKEN"#,
            ],
        );
        let err = load_caption_file(&path).unwrap_err();
        match err {
            IoError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn caption_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "caps.jsonl",
            &[
                r#"{"video_id":"v2","index":0,"start_s":0.0,"end_s":180.0,"caption":"x"}"#,
                r#"{"video_id":"v1","index":0,"start_s":0.0,"end_s":90.5,"caption":"y"}"#,
            ],
        );
        let sets = load_caption_file(&path).unwrap();
        let out = dir.path().join("round.jsonl");
        save_caption_file(&out, &sets).unwrap();
        let reloaded = load_caption_file(&out).unwrap();
        assert_eq!(sets, reloaded);
    }

    #[test]
    fn interleaved_videos_group_in_first_appearance_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "caps.jsonl",
            &[
                r#"{"video_id":"b","index":0,"start_s":0.0,"end_s":10.0,"caption":"b0"}"#,
                r#"{"video_id":"a","index":0,"start_s":0.0,"end_s":10.0,"caption":"a0"}"#,
                r#"{"video_id":"b","index":1,"start_s":10.0,"end_s":20.0,"caption":"b1"}"#,
            ],
        );
        let sets = load_caption_file(&path).unwrap();
        assert_eq!(sets[0].video_id(), "b");
        assert_eq!(sets[0].segment_count(), 2);
        assert_eq!(sets[1].video_id(), "a");
    }

    #[test]
    fn trace_file_round_trips_iterations_and_final() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v1.jsonl");
        let record = IterationRecord {
            k: 1,
            prompt_preamble: "p".into(),
            summary: "s".into(),
            score: 60,
        };
        let mut writer = TraceFileWriter::open(&path, false).unwrap();
        writer
            .append(&TraceLine::Iteration(record.clone()))
            .unwrap();
        let state = read_trace_file(&path).unwrap();
        assert_eq!(state.iterations, vec![record]);
        assert!(state.final_trace.is_none());
    }

    #[test]
    fn eval_pairs_join_on_item_id() {
        let dir = tempfile::tempdir().unwrap();
        let pred = write_lines(&dir, "pred.jsonl", &[r#"{"item_id":"x","text":"the cat"}"#]);
        let refs = write_lines(
            &dir,
            "refs.jsonl",
            &[r#"{"item_id":"x","texts":["the cat sat"]}"#],
        );
        let pairs = load_eval_pairs(&pred, &refs).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].candidate.tokens(), ["the", "cat"]);

        let missing = write_lines(&dir, "refs2.jsonl", &[r#"{"item_id":"y","texts":["z"]}"#]);
        assert!(load_eval_pairs(&pred, &missing).is_err());
    }

    #[test]
    fn safe_file_stem_escapes_path_hazards() {
        assert_eq!(safe_file_stem("video-01.mp4"), "video-01.mp4");
        assert_eq!(safe_file_stem("a/b"), "a_2fb");
        assert_eq!(safe_file_stem(".."), "..");
        assert_ne!(safe_file_stem("a/b"), safe_file_stem("a_b"));
    }
}
