//! The iterative prompt-refinement loop.
//!
//! For each video, a generator LLM writes a summary from the segment
//! captions, an evaluator LLM scores it 0–100, and an optimiser LLM rewrites
//! the generator's instruction using the full history of (instruction, score)
//! pairs. The loop runs up to `k_max` iterations and stops early when the
//! score fails to improve for `patience` consecutive iterations. Only the
//! instruction preamble evolves; the caption payload stays fixed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CaptionSet;
use crate::gateway::{Clock, Completer, CompletionRequest, GatewayError, Role, RoleAssignment};

const GENERATOR_MAX_TOKENS: u32 = 512;
const EVALUATOR_MAX_TOKENS: u32 = 64;
const OPTIMISER_MAX_TOKENS: u32 = 256;

/// Instruction the first generator call starts from. Later iterations
/// replace it with optimiser output.
const INITIAL_PREAMBLE: &str = "You are an expert video summarizer. Using the numbered, \
timestamped segment captions below, write one concise summary of the whole video. Focus on \
the key narrative and the main activities, ignore redundant or repeated details, and keep \
the summary to at most three sentences.";

const EVALUATOR_PREAMBLE: &str = "You are grading a video summary against the segment \
captions it was written from. Judge how well the summary captures the key information in \
the captions: relevance and accuracy. Reply with an integer score from 0 (useless) to 100 \
(perfect), formatted as 'Score: <n>'.";

const OPTIMISER_PREAMBLE: &str = "You are improving the instruction given to a video \
summarization assistant. Below are previously tried instructions and the score each one \
received (higher is better), listed from worst to best. Write a new instruction that is \
likely to score higher than all of them. Reply with the new instruction only.";

const SCORE_RETRY_SUFFIX: &str = "Reply with only an integer between 0 and 100.";

#[derive(Debug, Error, PartialEq)]
pub enum MetaError {
    #[error("caption set for video {0} is empty")]
    EmptyCaptions(String),
    #[error("invalid meta config: {0}")]
    InvalidConfig(String),
    #[error("resume records are inconsistent: {0}")]
    ResumeMismatch(String),
    #[error("trace sink failed: {0}")]
    Sink(String),
}

/// Failures inside a single iteration. They never escape `run_video`; the
/// trace is finalised with `StopReason::Error` instead.
#[derive(Debug, Error, PartialEq)]
pub enum IterationError {
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("generator returned empty output at iteration {0}")]
    EmptyGeneratorOutput(u32),
    #[error("optimiser returned empty output after iteration {0}")]
    EmptyOptimiserOutput(u32),
    #[error("evaluator output had no score in 0–100 after {attempts} attempt(s); last reply: {last_text:?}")]
    UnparseableScore { attempts: u32, last_text: String },
}

/// Loop parameters. Defaults: five iterations, stop after two consecutive
/// non-improving scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub k_max: u32,
    pub patience: u32,
    /// Extra evaluator calls allowed when its reply carries no usable score.
    pub score_retries: u32,
    pub seed: u64,
    /// Caption budget for the prompt; larger sets are evenly subsampled.
    pub max_captions: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            k_max: 5,
            patience: 2,
            score_retries: 1,
            seed: 0,
            max_captions: 512,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        if self.k_max < 2 {
            return Err(MetaError::InvalidConfig(format!(
                "k_max must be at least 2, got {}",
                self.k_max
            )));
        }
        if !(1..self.k_max).contains(&self.patience) {
            return Err(MetaError::InvalidConfig(format!(
                "patience must satisfy 1 <= patience < k_max, got patience {} with k_max {}",
                self.patience, self.k_max
            )));
        }
        if self.max_captions == 0 {
            return Err(MetaError::InvalidConfig(
                "max_captions must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// The generator prompt at one iteration: a mutable instruction preamble
/// plus the fixed caption block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptState {
    pub video_id: String,
    /// 1-based iteration this prompt drives.
    pub k: u32,
    pub preamble: String,
    caption_block: String,
}

impl PromptState {
    pub fn full_prompt(&self) -> String {
        format!("{}\n\n{}", self.preamble, self.caption_block)
    }

    pub fn caption_block(&self) -> &str {
        &self.caption_block
    }
}

/// A generated summary and the score the evaluator gave it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCandidate {
    pub k: u32,
    pub summary_text: String,
    pub score: u8,
}

/// One (instruction, score) pair of the optimisation history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPrompt {
    pub preamble: String,
    pub score: u8,
}

/// Everything recorded about one completed iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u32,
    pub prompt_preamble: String,
    pub summary: String,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    KMaxReached,
    EarlyStop,
    Error,
}

/// The full record of one video's loop: every iteration, the best candidate,
/// and why the loop ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRunTrace {
    pub video_id: String,
    pub captions_total: usize,
    pub captions_used: usize,
    pub iterations: Vec<IterationRecord>,
    pub best: Option<SummaryCandidate>,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: u64,
}

impl MetaRunTrace {
    pub fn candidates(&self) -> Vec<SummaryCandidate> {
        self.iterations
            .iter()
            .map(|it| SummaryCandidate {
                k: it.k,
                summary_text: it.summary.clone(),
                score: it.score,
            })
            .collect()
    }

    pub fn scored_prompts(&self) -> Vec<ScoredPrompt> {
        self.iterations
            .iter()
            .map(|it| ScoredPrompt {
                preamble: it.prompt_preamble.clone(),
                score: it.score,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    EarlyStop,
    KMaxReached,
}

/// Receives each iteration as soon as it completes, so partial progress can
/// be persisted and later resumed.
pub trait IterationSink {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<(), MetaError>;
}

/// Collects iterations in memory.
impl IterationSink for Vec<IterationRecord> {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<(), MetaError> {
        self.push(record.clone());
        Ok(())
    }
}

/// Sink that drops everything, for callers that only want the final trace.
pub struct NullSink;

impl IterationSink for NullSink {
    fn on_iteration(&mut self, _record: &IterationRecord) -> Result<(), MetaError> {
        Ok(())
    }
}

/// Renders the numbered, timestamped caption list that stays fixed across
/// iterations.
pub fn build_caption_block(captions: &[(f64, f64, &str)]) -> String {
    let mut block = String::from("Segment captions:\n");
    for (i, (start, end, text)) in captions.iter().enumerate() {
        block.push_str(&format!("{}. [{}s-{}s] {}\n", i + 1, start, end, text));
    }
    block
}

/// Evenly-strided subsample of `total` items down to `budget`: index
/// `floor(j * total / budget)` for `j = 0..budget`.
pub fn subsample_indices(total: usize, budget: usize) -> Vec<usize> {
    if total <= budget {
        return (0..total).collect();
    }
    (0..budget).map(|j| j * total / budget).collect()
}

/// Builds the iteration-1 prompt: the fixed task preamble plus the caption
/// block. Returns the state and how many captions made it into the prompt
/// after budget subsampling.
pub fn initial_prompt(
    captions: &CaptionSet,
    cfg: &MetaConfig,
) -> Result<(PromptState, usize), MetaError> {
    if captions.segment_count() == 0 {
        return Err(MetaError::EmptyCaptions(captions.video_id().to_string()));
    }
    cfg.validate()?;
    let indices = subsample_indices(captions.segment_count(), cfg.max_captions);
    let selected: Vec<(f64, f64, &str)> = indices
        .iter()
        .map(|&i| {
            let c = &captions.captions()[i];
            (c.window.start_s, c.window.end_s, c.text.as_str())
        })
        .collect();
    let used = selected.len();
    Ok((
        PromptState {
            video_id: captions.video_id().to_string(),
            k: 1,
            preamble: INITIAL_PREAMBLE.to_string(),
            caption_block: build_caption_block(&selected),
        },
        used,
    ))
}

/// Extracts the score from evaluator output: the first maximal digit run
/// whose value lies in 0–100, scanning left to right.
pub fn parse_score(evaluator_text: &str) -> Result<u8, IterationError> {
    let bytes = evaluator_text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if let Ok(value) = evaluator_text[start..i].parse::<u32>() {
                if value <= 100 {
                    return Ok(value as u8);
                }
            }
        } else {
            i += 1;
        }
    }
    Err(IterationError::UnparseableScore {
        attempts: 1,
        last_text: evaluator_text.to_string(),
    })
}

/// Stopping rule over the scores seen so far: the loop ends at `k_max`
/// iterations, or early once each of the last `patience` scores failed to
/// improve on the best score seen before it.
pub fn stop_decision(scores: &[u8], cfg: &MetaConfig) -> StopDecision {
    if scores.len() as u32 >= cfg.k_max {
        return StopDecision::KMaxReached;
    }
    let patience = cfg.patience as usize;
    // Need a baseline candidate before the non-improvement window.
    if scores.len() <= patience {
        return StopDecision::Continue;
    }
    let window_start = scores.len() - patience;
    let all_stale = (window_start..scores.len()).all(|i| {
        let prior_best = scores[..i].iter().copied().max().expect("i >= 1");
        scores[i] <= prior_best
    });
    if all_stale {
        StopDecision::EarlyStop
    } else {
        StopDecision::Continue
    }
}

/// [`stop_decision`] over a trace's recorded iterations.
pub fn should_stop(trace: &MetaRunTrace, cfg: &MetaConfig) -> StopDecision {
    let scores: Vec<u8> = trace.iterations.iter().map(|it| it.score).collect();
    stop_decision(&scores, cfg)
}

/// Renders the optimiser input: every (instruction, score) pair so far,
/// ascending by score with ties kept in iteration order, followed by the
/// fixed rewrite instruction.
pub fn build_optimiser_prompt(history: &[ScoredPrompt]) -> String {
    let mut ordered: Vec<&ScoredPrompt> = history.iter().collect();
    // Stable sort keeps equal scores in iteration order.
    ordered.sort_by_key(|p| p.score);
    let mut prompt = String::from(OPTIMISER_PREAMBLE);
    prompt.push('\n');
    for scored in ordered {
        prompt.push_str(&format!("\nScore {}:\n{}\n", scored.score, scored.preamble));
    }
    prompt
}

/// Renders the evaluator input for one candidate summary.
pub fn build_evaluator_prompt(caption_block: &str, summary: &str) -> String {
    format!(
        "{}\n\n{}\nSummary to grade:\n{}",
        EVALUATOR_PREAMBLE, caption_block, summary
    )
}

fn request_for(
    role: Role,
    video_id: &str,
    iteration: u32,
    prompt: String,
    cfg: &MetaConfig,
) -> CompletionRequest {
    let max_output_tokens = match role {
        Role::Generator => GENERATOR_MAX_TOKENS,
        Role::Evaluator => EVALUATOR_MAX_TOKENS,
        Role::Optimiser => OPTIMISER_MAX_TOKENS,
    };
    CompletionRequest {
        role,
        video_id: video_id.to_string(),
        iteration,
        prompt,
        max_output_tokens,
        temperature: role.default_temperature(),
        seed: Some(cfg.seed),
    }
}

/// Runs one generate → evaluate step: calls the generator with the current
/// prompt, asks the evaluator to score the summary, and parses the score
/// (retrying the evaluator up to `cfg.score_retries` times on unparseable
/// replies).
pub fn run_iteration<C: Completer + ?Sized>(
    state: &PromptState,
    cfg: &MetaConfig,
    assignment: &RoleAssignment,
    gateway: &C,
) -> Result<IterationRecord, IterationError> {
    let generated = gateway
        .complete(
            assignment,
            &request_for(
                Role::Generator,
                &state.video_id,
                state.k,
                state.full_prompt(),
                cfg,
            ),
        )
        .map_err(IterationError::Gateway)?;
    let summary = generated.text.trim().to_string();
    if summary.is_empty() {
        return Err(IterationError::EmptyGeneratorOutput(state.k));
    }

    let base_prompt = build_evaluator_prompt(&state.caption_block, &summary);
    let mut attempts = 0;
    let mut last_text = String::new();
    while attempts <= cfg.score_retries {
        attempts += 1;
        let prompt = if attempts == 1 {
            base_prompt.clone()
        } else {
            format!("{}\n{}", base_prompt, SCORE_RETRY_SUFFIX)
        };
        let reply = gateway
            .complete(
                assignment,
                &request_for(Role::Evaluator, &state.video_id, state.k, prompt, cfg),
            )
            .map_err(IterationError::Gateway)?;
        match parse_score(&reply.text) {
            Ok(score) => {
                return Ok(IterationRecord {
                    k: state.k,
                    prompt_preamble: state.preamble.clone(),
                    summary,
                    score,
                });
            }
            Err(_) => last_text = reply.text,
        }
    }
    Err(IterationError::UnparseableScore {
        attempts,
        last_text,
    })
}

fn best_candidate(iterations: &[IterationRecord]) -> Option<SummaryCandidate> {
    let mut best: Option<&IterationRecord> = None;
    for it in iterations {
        // Strict comparison keeps the earliest iteration on ties.
        if best.map(|b| it.score > b.score).unwrap_or(true) {
            best = Some(it);
        }
    }
    best.map(|it| SummaryCandidate {
        k: it.k,
        summary_text: it.summary.clone(),
        score: it.score,
    })
}

fn finalize(
    video_id: &str,
    captions_total: usize,
    captions_used: usize,
    iterations: Vec<IterationRecord>,
    stop_reason: StopReason,
    error: Option<String>,
    wall_time_ms: u64,
) -> MetaRunTrace {
    MetaRunTrace {
        video_id: video_id.to_string(),
        captions_total,
        captions_used,
        best: best_candidate(&iterations),
        iterations,
        stop_reason,
        error,
        wall_time_ms,
    }
}

/// Runs the full loop for one video and returns its trace. Iteration
/// failures do not propagate: the trace is finalised with
/// `StopReason::Error` and keeps every completed iteration.
pub fn run_video<C: Completer + ?Sized>(
    captions: &CaptionSet,
    cfg: &MetaConfig,
    assignment: &RoleAssignment,
    gateway: &C,
    clock: &dyn Clock,
    sink: &mut dyn IterationSink,
) -> Result<MetaRunTrace, MetaError> {
    resume_video(captions, cfg, assignment, gateway, clock, Vec::new(), sink)
}

/// Like [`run_video`] but continues after `completed` iterations from an
/// earlier, interrupted run. The next instruction preamble is rebuilt by
/// replaying the optimiser on the recorded history.
pub fn resume_video<C: Completer + ?Sized>(
    captions: &CaptionSet,
    cfg: &MetaConfig,
    assignment: &RoleAssignment,
    gateway: &C,
    clock: &dyn Clock,
    completed: Vec<IterationRecord>,
    sink: &mut dyn IterationSink,
) -> Result<MetaRunTrace, MetaError> {
    let (initial, captions_used) = initial_prompt(captions, cfg)?;
    let captions_total = captions.segment_count();
    let video_id = captions.video_id().to_string();

    for (i, record) in completed.iter().enumerate() {
        if record.k != i as u32 + 1 {
            return Err(MetaError::ResumeMismatch(format!(
                "expected iteration {} at position {}, found {}",
                i + 1,
                i,
                record.k
            )));
        }
    }
    if completed.len() as u32 > cfg.k_max {
        return Err(MetaError::ResumeMismatch(format!(
            "{} completed iterations exceed k_max {}",
            completed.len(),
            cfg.k_max
        )));
    }

    let started = clock.now_ms();
    let mut iterations = completed;
    let caption_block = initial.caption_block.clone();

    loop {
        let scores: Vec<u8> = iterations.iter().map(|it| it.score).collect();
        match stop_decision(&scores, cfg) {
            StopDecision::KMaxReached => {
                return Ok(finalize(
                    &video_id,
                    captions_total,
                    captions_used,
                    iterations,
                    StopReason::KMaxReached,
                    None,
                    clock.now_ms().saturating_sub(started),
                ));
            }
            StopDecision::EarlyStop => {
                return Ok(finalize(
                    &video_id,
                    captions_total,
                    captions_used,
                    iterations,
                    StopReason::EarlyStop,
                    None,
                    clock.now_ms().saturating_sub(started),
                ));
            }
            StopDecision::Continue => {}
        }

        let next_k = iterations.len() as u32 + 1;
        let preamble = if iterations.is_empty() {
            Ok(initial.preamble.clone())
        } else {
            next_preamble(&iterations, cfg, assignment, gateway, &video_id)
        };
        let state = match preamble {
            Ok(preamble) => PromptState {
                video_id: video_id.clone(),
                k: next_k,
                preamble,
                caption_block: caption_block.clone(),
            },
            Err(err) => {
                return Ok(finalize(
                    &video_id,
                    captions_total,
                    captions_used,
                    iterations,
                    StopReason::Error,
                    Some(err.to_string()),
                    clock.now_ms().saturating_sub(started),
                ));
            }
        };

        match run_iteration(&state, cfg, assignment, gateway) {
            Ok(record) => {
                sink.on_iteration(&record)?;
                iterations.push(record);
            }
            Err(err) => {
                return Ok(finalize(
                    &video_id,
                    captions_total,
                    captions_used,
                    iterations,
                    StopReason::Error,
                    Some(err.to_string()),
                    clock.now_ms().saturating_sub(started),
                ));
            }
        }
    }
}

/// Asks the optimiser for the next instruction, passing the complete history
/// of (instruction, score) pairs — exactly `k` pairs after `k` iterations.
fn next_preamble<C: Completer + ?Sized>(
    iterations: &[IterationRecord],
    cfg: &MetaConfig,
    assignment: &RoleAssignment,
    gateway: &C,
    video_id: &str,
) -> Result<String, IterationError> {
    let history: Vec<ScoredPrompt> = iterations
        .iter()
        .map(|it| ScoredPrompt {
            preamble: it.prompt_preamble.clone(),
            score: it.score,
        })
        .collect();
    let prompt = build_optimiser_prompt(&history);
    let last_k = iterations.len() as u32;
    let reply = gateway
        .complete(
            assignment,
            &request_for(Role::Optimiser, video_id, last_k, prompt, cfg),
        )
        .map_err(IterationError::Gateway)?;
    let preamble = reply.text.trim().to_string();
    if preamble.is_empty() {
        return Err(IterationError::EmptyOptimiserOutput(last_k));
    }
    Ok(preamble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Caption, CaptionSet, SegmentWindow};
    use crate::gateway::{MockScript, ScriptedGateway};

    fn caption_set(video: &str, texts: &[&str]) -> CaptionSet {
        let captions = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Caption {
                window: SegmentWindow {
                    video_id: video.to_string(),
                    index: i,
                    start_s: i as f64 * 180.0,
                    end_s: (i + 1) as f64 * 180.0,
                },
                text: t.to_string(),
            })
            .collect();
        CaptionSet::from_captions(video.to_string(), captions).unwrap()
    }

    /// Scripts a full run: generator summaries "summary k", evaluator
    /// replies "Score: s" per iteration, optimiser replies "preamble k+1".
    fn scripted_run(video: &str, scores: &[u8]) -> MockScript {
        let mut script = MockScript::new();
        for (i, &s) in scores.iter().enumerate() {
            let k = i as u32 + 1;
            script.insert(Role::Generator, video, k, &format!("summary {k}"));
            script.insert(Role::Evaluator, video, k, &format!("Score: {s}"));
            script.insert(Role::Optimiser, video, k, &format!("preamble {}", k + 1));
        }
        script
    }

    #[test]
    fn initial_prompt_numbers_every_caption() {
        let set = caption_set("v1", &["a man walks", "he sits down", "he waves"]);
        let (state, used) = initial_prompt(&set, &MetaConfig::default()).unwrap();
        assert_eq!(used, 3);
        let prompt = state.full_prompt();
        assert!(prompt.contains("1. [0s-180s] a man walks"));
        assert!(prompt.contains("2. [180s-360s] he sits down"));
        assert!(prompt.contains("3. [360s-540s] he waves"));
        assert_eq!(prompt.matches("s-").count(), 3);
    }

    #[test]
    fn oversized_caption_sets_are_subsampled_evenly() {
        let texts: Vec<String> = (0..10).map(|i| format!("caption {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        let set = caption_set("v1", &refs);
        let cfg = MetaConfig {
            max_captions: 4,
            ..MetaConfig::default()
        };
        let (state, used) = initial_prompt(&set, &cfg).unwrap();
        assert_eq!(used, 4);
        // floor(j * 10 / 4) for j = 0..4 -> 0, 2, 5, 7
        for picked in ["caption 0", "caption 2", "caption 5", "caption 7"] {
            assert!(state.full_prompt().contains(picked), "missing {picked}");
        }
    }

    #[test]
    fn subsample_indices_are_strictly_increasing() {
        let idx = subsample_indices(100, 7);
        assert_eq!(idx.len(), 7);
        for pair in idx.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        assert_eq!(subsample_indices(3, 10), vec![0, 1, 2]);
    }

    #[test]
    fn parse_score_takes_first_in_range_integer() {
        assert_eq!(parse_score("Score: 85").unwrap(), 85);
        assert_eq!(parse_score("I'd rate this 42 out of 100").unwrap(), 42);
        assert_eq!(parse_score("year 2024 verdict: 85").unwrap(), 85);
        assert_eq!(parse_score("100").unwrap(), 100);
        assert!(matches!(
            parse_score("excellent work"),
            Err(IterationError::UnparseableScore { .. })
        ));
    }

    #[test]
    fn stop_rule_matches_worked_examples() {
        let cfg = MetaConfig::default(); // k_max 5, patience 2
        assert_eq!(stop_decision(&[60], &cfg), StopDecision::Continue);
        assert_eq!(stop_decision(&[60, 70, 70], &cfg), StopDecision::Continue);
        assert_eq!(
            stop_decision(&[60, 70, 70, 70], &cfg),
            StopDecision::EarlyStop
        );
        assert_eq!(
            stop_decision(&[60, 65, 70, 75, 80], &cfg),
            StopDecision::KMaxReached
        );
    }

    #[test]
    fn optimiser_prompt_orders_pairs_by_score_then_iteration() {
        let history = vec![
            ScoredPrompt {
                preamble: "first".into(),
                score: 70,
            },
            ScoredPrompt {
                preamble: "second".into(),
                score: 60,
            },
        ];
        let prompt = build_optimiser_prompt(&history);
        let pos_60 = prompt.find("Score 60:\nsecond").unwrap();
        let pos_70 = prompt.find("Score 70:\nfirst").unwrap();
        assert!(pos_60 < pos_70);

        let tied = vec![
            ScoredPrompt {
                preamble: "k1".into(),
                score: 70,
            },
            ScoredPrompt {
                preamble: "k2".into(),
                score: 70,
            },
        ];
        let prompt = build_optimiser_prompt(&tied);
        assert!(prompt.find("k1").unwrap() < prompt.find("k2").unwrap());
    }

    #[test]
    fn run_iteration_scores_the_generated_summary() {
        let set = caption_set("v1", &["a", "b"]);
        let cfg = MetaConfig::default();
        let mut script = MockScript::new();
        script.insert(Role::Generator, "v1", 1, "summary A");
        script.insert(Role::Evaluator, "v1", 1, "Score: 70");
        let gateway = ScriptedGateway::new(script, "mock");
        let (state, _) = initial_prompt(&set, &cfg).unwrap();
        let record =
            run_iteration(&state, &cfg, &RoleAssignment::uniform("mock"), &gateway).unwrap();
        assert_eq!(record.k, 1);
        assert_eq!(record.summary, "summary A");
        assert_eq!(record.score, 70);
    }

    #[test]
    fn unparseable_evaluator_reply_exhausts_score_retries() {
        let set = caption_set("v1", &["a"]);
        let cfg = MetaConfig::default(); // score_retries 1 -> 2 attempts
        let mut script = MockScript::new();
        script.insert(Role::Generator, "v1", 1, "summary A");
        script.insert(Role::Evaluator, "v1", 1, "great");
        let gateway = ScriptedGateway::new(script, "mock");
        let (state, _) = initial_prompt(&set, &cfg).unwrap();
        let err =
            run_iteration(&state, &cfg, &RoleAssignment::uniform("mock"), &gateway).unwrap_err();
        assert!(matches!(
            err,
            IterationError::UnparseableScore { attempts: 2, .. }
        ));
    }

    #[test]
    fn empty_generator_output_is_an_iteration_error() {
        let set = caption_set("v1", &["a"]);
        let cfg = MetaConfig::default();
        let mut script = MockScript::new();
        script.insert(Role::Generator, "v1", 1, "   ");
        let gateway = ScriptedGateway::new(script, "mock");
        let (state, _) = initial_prompt(&set, &cfg).unwrap();
        let err =
            run_iteration(&state, &cfg, &RoleAssignment::uniform("mock"), &gateway).unwrap_err();
        assert_eq!(err, IterationError::EmptyGeneratorOutput(1));
    }

    #[test]
    fn rising_scores_run_all_five_iterations() {
        let set = caption_set("v1", &["a", "b", "c"]);
        let cfg = MetaConfig::default();
        let gateway = ScriptedGateway::new(scripted_run("v1", &[60, 65, 70, 75, 80]), "mock");
        let trace = run_video(
            &set,
            &cfg,
            &RoleAssignment::uniform("mock"),
            &gateway,
            gateway.clock(),
            &mut NullSink,
        )
        .unwrap();
        assert_eq!(trace.iterations.len(), 5);
        assert_eq!(trace.stop_reason, StopReason::KMaxReached);
        let best = trace.best.as_ref().unwrap();
        assert_eq!(best.score, 80);
        assert_eq!(best.k, 5);
    }

    #[test]
    fn plateau_stops_early_with_best_at_second_iteration() {
        let set = caption_set("v1", &["a", "b"]);
        let cfg = MetaConfig::default();
        let gateway = ScriptedGateway::new(scripted_run("v1", &[60, 70, 70, 70]), "mock");
        let trace = run_video(
            &set,
            &cfg,
            &RoleAssignment::uniform("mock"),
            &gateway,
            gateway.clock(),
            &mut NullSink,
        )
        .unwrap();
        assert_eq!(trace.iterations.len(), 4);
        assert_eq!(trace.stop_reason, StopReason::EarlyStop);
        let best = trace.best.as_ref().unwrap();
        assert_eq!(best.score, 70);
        assert_eq!(best.k, 2);
    }

    #[test]
    fn identical_scripts_yield_identical_traces() {
        let set = caption_set("v1", &["a", "b"]);
        let cfg = MetaConfig::default();
        let run = || {
            let gateway = ScriptedGateway::new(scripted_run("v1", &[60, 70, 70, 70]), "mock");
            run_video(
                &set,
                &cfg,
                &RoleAssignment::uniform("mock"),
                &gateway,
                gateway.clock(),
                &mut NullSink,
            )
            .unwrap()
        };
        let a = serde_json::to_string(&run()).unwrap();
        let b = serde_json::to_string(&run()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_serde_round_trip_preserves_best() {
        let set = caption_set("v1", &["a", "b"]);
        let cfg = MetaConfig::default();
        let gateway = ScriptedGateway::new(scripted_run("v1", &[60, 70, 70, 70]), "mock");
        let trace = run_video(
            &set,
            &cfg,
            &RoleAssignment::uniform("mock"),
            &gateway,
            gateway.clock(),
            &mut NullSink,
        )
        .unwrap();
        let json = serde_json::to_string(&trace).unwrap();
        let back: MetaRunTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, trace);
        let recomputed = best_candidate(&back.iterations);
        assert_eq!(recomputed, back.best);
    }

    #[test]
    fn iteration_failure_finalises_trace_with_error() {
        let set = caption_set("v1", &["a"]);
        let cfg = MetaConfig::default();
        let mut script = scripted_run("v1", &[60, 65]);
        // Break iteration 3's generator: no entry, no default.
        script.insert(Role::Evaluator, "v1", 2, "Score: 65");
        let gateway = ScriptedGateway::new(script, "mock");
        let trace = run_video(
            &set,
            &cfg,
            &RoleAssignment::uniform("mock"),
            &gateway,
            gateway.clock(),
            &mut NullSink,
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::Error);
        assert_eq!(trace.iterations.len(), 2);
        assert_eq!(trace.best.as_ref().unwrap().score, 65);
        assert!(trace.error.is_some());
    }

    #[test]
    fn resume_continues_from_completed_iterations() {
        let set = caption_set("v1", &["a", "b"]);
        let cfg = MetaConfig::default();
        let gateway = ScriptedGateway::new(scripted_run("v1", &[60, 70, 70, 70]), "mock");
        let assignment = RoleAssignment::uniform("mock");

        // Full reference run.
        let full = run_video(
            &set,
            &cfg,
            &assignment,
            &gateway,
            gateway.clock(),
            &mut NullSink,
        )
        .unwrap();

        // Resume after two completed iterations.
        let completed: Vec<IterationRecord> = full.iterations[..2].to_vec();
        let gateway2 = ScriptedGateway::new(scripted_run("v1", &[60, 70, 70, 70]), "mock");
        let resumed = resume_video(
            &set,
            &cfg,
            &assignment,
            &gateway2,
            gateway2.clock(),
            completed,
            &mut NullSink,
        )
        .unwrap();
        assert_eq!(resumed.iterations, full.iterations);
        assert_eq!(resumed.stop_reason, full.stop_reason);
        assert_eq!(resumed.best, full.best);
    }

    #[test]
    fn resume_rejects_non_contiguous_records() {
        let set = caption_set("v1", &["a"]);
        let cfg = MetaConfig::default();
        let gateway = ScriptedGateway::new(MockScript::new(), "mock");
        let bad = vec![IterationRecord {
            k: 2,
            prompt_preamble: "p".into(),
            summary: "s".into(),
            score: 60,
        }];
        let err = resume_video(
            &set,
            &cfg,
            &RoleAssignment::uniform("mock"),
            &gateway,
            gateway.clock(),
            bad,
            &mut NullSink,
        )
        .unwrap_err();
        assert!(matches!(err, MetaError::ResumeMismatch(_)));
    }

    #[test]
    fn empty_caption_set_is_rejected_before_any_call() {
        // CaptionSet construction already forbids empty sets, so drive the
        // validation through MetaConfig instead.
        let set = caption_set("v1", &["a"]);
        let bad_cfg = MetaConfig {
            patience: 5,
            k_max: 5,
            ..MetaConfig::default()
        };
        let gateway = ScriptedGateway::new(MockScript::new(), "mock");
        assert!(matches!(
            run_video(
                &set,
                &bad_cfg,
                &RoleAssignment::uniform("mock"),
                &gateway,
                gateway.clock(),
                &mut NullSink,
            ),
            Err(MetaError::InvalidConfig(_))
        ));
    }
}
