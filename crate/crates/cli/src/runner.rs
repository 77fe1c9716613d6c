//! Concurrent per-video execution of the prompt-refinement loop with
//! resumable, per-worker trace files.
//!
//! Each video owns one working file `<out>/<video_id>.trace.jsonl` holding
//! every completed iteration plus a final record. On re-runs, videos whose
//! final record exists (and did not end in error) are returned as-is;
//! interrupted or errored videos resume from their completed iterations.
//! When all videos finish, a consolidated `<out>/traces.jsonl` is written
//! with one final trace per line in input order.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use sumforge_core::corpus::CaptionSet;
use sumforge_core::gateway::{Clock, Completer, RoleAssignment};
use sumforge_core::metaprompt::{
    resume_video, IterationRecord, IterationSink, MetaConfig, MetaError, MetaRunTrace, StopReason,
};

use crate::io::{read_trace_file, safe_file_stem, IoError, TraceFileWriter, TraceLine};

pub const CONSOLIDATED_FILE: &str = "traces.jsonl";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("creating {path}: {source}")]
    OutDir {
        path: String,
        source: std::io::Error,
    },
    #[error("worker panicked")]
    WorkerPanic,
}

/// Where a finished video's trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOrigin {
    /// Final record already on disk; nothing recomputed.
    Reused,
    /// Executed this run (fresh or resumed).
    Executed,
}

pub struct VideoOutcome {
    pub trace: MetaRunTrace,
    pub origin: TraceOrigin,
}

struct FileSink {
    writer: TraceFileWriter,
}

impl IterationSink for FileSink {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<(), MetaError> {
        self.writer
            .append(&TraceLine::Iteration(record.clone()))
            .map_err(|e| MetaError::Sink(e.to_string()))
    }
}

pub fn trace_file_path(out_dir: &Path, video_id: &str) -> PathBuf {
    out_dir.join(format!("{}.trace.jsonl", safe_file_stem(video_id)))
}

/// Runs (or resumes) one video, persisting progress as it happens.
pub fn run_one_video<C: Completer + ?Sized>(
    captions: &CaptionSet,
    cfg: &MetaConfig,
    assignment: &RoleAssignment,
    gateway: &C,
    clock: &dyn Clock,
    out_dir: &Path,
) -> Result<VideoOutcome, RunnerError> {
    let path = trace_file_path(out_dir, captions.video_id());
    let mut completed: Vec<IterationRecord> = Vec::new();
    if path.exists() {
        let state = read_trace_file(&path)?;
        match state.final_trace {
            // A finished trace is reused unless it ended in error, in which
            // case this run retries from the retained iterations.
            Some(trace) if trace.stop_reason != StopReason::Error => {
                return Ok(VideoOutcome {
                    trace,
                    origin: TraceOrigin::Reused,
                });
            }
            _ => completed = state.iterations,
        }
    }

    // Rewrite the retained iterations so the file never holds stale final
    // records, then let the loop append from there.
    let mut writer = TraceFileWriter::open(&path, true)?;
    for record in &completed {
        writer.append(&TraceLine::Iteration(record.clone()))?;
    }
    let mut sink = FileSink { writer };
    let trace = resume_video(
        captions, cfg, assignment, gateway, clock, completed, &mut sink,
    )?;
    sink.writer.append(&TraceLine::Final(trace.clone()))?;
    Ok(VideoOutcome {
        trace,
        origin: TraceOrigin::Executed,
    })
}

/// Fans videos out over `concurrency` worker threads (the per-video loop
/// itself stays sequential) and returns traces in input order.
pub fn run_all_videos<C: Completer + Sync + ?Sized>(
    caption_sets: &[CaptionSet],
    cfg: &MetaConfig,
    assignment: &RoleAssignment,
    gateway: &C,
    clock: &(dyn Clock + Sync),
    out_dir: &Path,
    concurrency: usize,
) -> Result<Vec<VideoOutcome>, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(|e| RunnerError::OutDir {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let width = concurrency.max(1).min(caption_sets.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<VideoOutcome, RunnerError>>>> =
        Mutex::new((0..caption_sets.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..width {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= caption_sets.len() {
                    break;
                }
                let outcome = run_one_video(
                    &caption_sets[index],
                    cfg,
                    assignment,
                    gateway,
                    clock,
                    out_dir,
                );
                results.lock().expect("results poisoned")[index] = Some(outcome);
            });
        }
    });

    let collected = results.into_inner().expect("results poisoned");
    let mut outcomes = Vec::with_capacity(collected.len());
    for slot in collected {
        outcomes.push(slot.ok_or(RunnerError::WorkerPanic)??);
    }

    let traces: Vec<&MetaRunTrace> = outcomes.iter().map(|o| &o.trace).collect();
    crate::io::write_jsonl(&out_dir.join(CONSOLIDATED_FILE), &traces)?;
    Ok(outcomes)
}
