//! Data model for long videos: segment windows, per-segment pseudo-captions,
//! and the fine-tuning records assembled from optimised summaries.
//!
//! All values are immutable after construction and safe to share across
//! workers. File parsing and persistence live in the companion crate; this
//! module owns validation and the window arithmetic.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metaprompt::MetaRunTrace;

/// Default segment width in seconds.
pub const DEFAULT_WINDOW_S: f64 = 180.0;
/// Final windows shorter than this are merged into the previous window.
pub const DEFAULT_MIN_TAIL_S: f64 = 30.0;

/// Tolerance used when comparing window boundaries loaded from text files.
const BOUNDARY_TOL_S: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("window width must be positive, got {0}")]
    NonPositiveWindow(f64),
    #[error("min tail {tail} must lie in [0, window {window})")]
    BadMinTail { tail: f64, window: f64 },
    #[error("caption set for video {video_id} has no captions")]
    EmptyCaptionSet { video_id: String },
    #[error("caption {index} of video {video_id} has empty text")]
    EmptyCaptionText { video_id: String, index: usize },
    #[error("caption {position} of video {video_id} belongs to video {found}")]
    VideoIdMismatch {
        video_id: String,
        position: usize,
        found: String,
    },
    #[error(
        "caption indices of video {video_id} must run 0,1,2,…; saw {found} at position {position}"
    )]
    BadIndexSequence {
        video_id: String,
        position: usize,
        found: usize,
    },
    #[error("window {index} of video {video_id} has invalid extent [{start_s}, {end_s})")]
    BadWindowExtent {
        video_id: String,
        index: usize,
        start_s: f64,
        end_s: f64,
    },
    #[error("windows {first} and {second} of video {video_id} overlap")]
    OverlappingWindows {
        video_id: String,
        first: usize,
        second: usize,
    },
    #[error("windows {first} and {second} of video {video_id} leave a gap")]
    NonContiguousWindows {
        video_id: String,
        first: usize,
        second: usize,
    },
    #[error("declared duration {duration_s} s is shorter than the last window end {last_end_s} s for video {video_id}")]
    DurationTooShort {
        video_id: String,
        duration_s: f64,
        last_end_s: f64,
    },
    #[error("no caption set provided for video {video_id}")]
    MissingCaptions { video_id: String },
    #[error("fine-tune record for video {video_id} is invalid: {reason}")]
    BadFinetuneRecord { video_id: String, reason: String },
}

/// One fixed-width slice of a video's timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWindow {
    pub video_id: String,
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl SegmentWindow {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A pseudo-caption describing one segment window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub window: SegmentWindow,
    pub text: String,
}

/// The ordered, validated caption collection of one long video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionSet {
    video_id: String,
    duration_s: f64,
    captions: Vec<Caption>,
}

impl CaptionSet {
    /// Builds a caption set, checking every window invariant: indices run
    /// 0..M, extents are positive, windows neither overlap nor leave gaps,
    /// and every caption has non-blank text.
    pub fn new(
        video_id: String,
        duration_s: f64,
        captions: Vec<Caption>,
    ) -> Result<Self, CorpusError> {
        if captions.is_empty() {
            return Err(CorpusError::EmptyCaptionSet { video_id });
        }
        for (position, caption) in captions.iter().enumerate() {
            let w = &caption.window;
            if w.video_id != video_id {
                return Err(CorpusError::VideoIdMismatch {
                    video_id,
                    position,
                    found: w.video_id.clone(),
                });
            }
            if w.index != position {
                return Err(CorpusError::BadIndexSequence {
                    video_id,
                    position,
                    found: w.index,
                });
            }
            if !(w.start_s >= 0.0 && w.end_s > w.start_s) {
                return Err(CorpusError::BadWindowExtent {
                    video_id,
                    index: w.index,
                    start_s: w.start_s,
                    end_s: w.end_s,
                });
            }
            if caption.text.trim().is_empty() {
                return Err(CorpusError::EmptyCaptionText {
                    video_id,
                    index: w.index,
                });
            }
        }
        for pair in captions.windows(2) {
            let (a, b) = (&pair[0].window, &pair[1].window);
            if b.start_s < a.end_s - BOUNDARY_TOL_S {
                return Err(CorpusError::OverlappingWindows {
                    video_id,
                    first: a.index,
                    second: b.index,
                });
            }
            if b.start_s > a.end_s + BOUNDARY_TOL_S {
                return Err(CorpusError::NonContiguousWindows {
                    video_id,
                    first: a.index,
                    second: b.index,
                });
            }
        }
        let last_end = captions.last().expect("non-empty").window.end_s;
        if duration_s < last_end - BOUNDARY_TOL_S {
            return Err(CorpusError::DurationTooShort {
                video_id,
                duration_s,
                last_end_s: last_end,
            });
        }
        Ok(Self {
            video_id,
            duration_s,
            captions,
        })
    }

    /// Like [`CaptionSet::new`] with the duration taken from the last window.
    pub fn from_captions(video_id: String, captions: Vec<Caption>) -> Result<Self, CorpusError> {
        let duration = captions.last().map(|c| c.window.end_s).unwrap_or(0.0);
        Self::new(video_id, duration, captions)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn captions(&self) -> &[Caption] {
        &self.captions
    }

    /// Number of segment windows in this video.
    pub fn segment_count(&self) -> usize {
        self.captions.len()
    }
}

/// One training pair for the downstream fine-tuning stage: every segment
/// caption of a video plus its best optimised pseudo-summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub video_id: String,
    pub segment_captions: Vec<String>,
    pub pseudo_summary: String,
    pub score: u8,
    pub iterations_used: u32,
}

impl FinetuneRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.pseudo_summary.trim().is_empty() {
            return Err(CorpusError::BadFinetuneRecord {
                video_id: self.video_id.clone(),
                reason: "empty pseudo-summary".to_string(),
            });
        }
        if self.iterations_used == 0 {
            return Err(CorpusError::BadFinetuneRecord {
                video_id: self.video_id.clone(),
                reason: "iterations_used must be at least 1".to_string(),
            });
        }
        if self.segment_captions.is_empty() {
            return Err(CorpusError::BadFinetuneRecord {
                video_id: self.video_id.clone(),
                reason: "no segment captions".to_string(),
            });
        }
        Ok(())
    }
}

/// Splits `[0, duration_s)` into consecutive windows of `window_s` seconds.
///
/// A final partial window shorter than `min_tail_s` is merged into the
/// previous window; when the whole video is shorter than one window the
/// single window covers everything.
pub fn split_segments(
    video_id: &str,
    duration_s: f64,
    window_s: f64,
    min_tail_s: f64,
) -> Result<Vec<SegmentWindow>, CorpusError> {
    // NaN arguments must fail the positivity checks too.
    if duration_s.is_nan() || duration_s <= 0.0 {
        return Err(CorpusError::NonPositiveDuration(duration_s));
    }
    if window_s.is_nan() || window_s <= 0.0 {
        return Err(CorpusError::NonPositiveWindow(window_s));
    }
    if min_tail_s.is_nan() || min_tail_s < 0.0 || min_tail_s >= window_s {
        return Err(CorpusError::BadMinTail {
            tail: min_tail_s,
            window: window_s,
        });
    }

    let mut starts = Vec::new();
    let mut k = 0u64;
    while (k as f64) * window_s < duration_s {
        starts.push(k as f64 * window_s);
        k += 1;
    }
    // Merge an undersized tail into the previous window.
    if starts.len() >= 2 && duration_s - starts[starts.len() - 1] < min_tail_s {
        starts.pop();
    }

    Ok(starts
        .iter()
        .enumerate()
        .map(|(i, &start)| SegmentWindow {
            video_id: video_id.to_string(),
            index: i,
            start_s: start,
            end_s: if i + 1 < starts.len() {
                starts[i + 1]
            } else {
                duration_s
            },
        })
        .collect())
}

/// A trace that produced no scored candidate and was therefore skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrace {
    pub video_id: String,
    pub reason: String,
}

/// Result of [`export_finetune_dataset`]: records in input-trace order plus
/// the traces that had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportOutcome {
    pub records: Vec<FinetuneRecord>,
    pub skipped: Vec<SkippedTrace>,
}

/// Assembles one fine-tuning record per trace that holds at least one scored
/// candidate: all segment captions of the video plus the highest-scoring
/// summary. Traces without a usable candidate are skipped and reported;
/// a trace whose video has no caption set is an error.
pub fn export_finetune_dataset(
    traces: &[MetaRunTrace],
    captions: &[CaptionSet],
) -> Result<ExportOutcome, CorpusError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for trace in traces {
        let set = captions
            .iter()
            .find(|c| c.video_id() == trace.video_id)
            .ok_or_else(|| CorpusError::MissingCaptions {
                video_id: trace.video_id.clone(),
            })?;
        match &trace.best {
            Some(best) => records.push(FinetuneRecord {
                video_id: trace.video_id.clone(),
                segment_captions: set.captions().iter().map(|c| c.text.clone()).collect(),
                pseudo_summary: best.summary_text.clone(),
                score: best.score,
                iterations_used: trace.iterations.len() as u32,
            }),
            None => skipped.push(SkippedTrace {
                video_id: trace.video_id.clone(),
                reason: trace
                    .error
                    .clone()
                    .unwrap_or_else(|| format!("no scored candidate ({:?})", trace.stop_reason)),
            }),
        }
    }
    Ok(ExportOutcome { records, skipped })
}
