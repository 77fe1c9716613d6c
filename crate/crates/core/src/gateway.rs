//! Role-based completion plumbing.
//!
//! Every LLM call in the crate flows through the [`Completer`] trait, which
//! resolves one of three roles — generator, evaluator, optimiser — to a
//! backend. This module defines the request/response types, a deterministic
//! scripted mock backend, and the pure retry/backoff and rate-limit logic.
//! Time is always taken from a [`Clock`] so the same code runs against real
//! wall time in the companion crate and virtual time in tests.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use core::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three LLM roles of the prompt-refinement loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Evaluator,
    Optimiser,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Generator => "generator",
            Role::Evaluator => "evaluator",
            Role::Optimiser => "optimiser",
        }
    }

    /// Sampling temperature used when the backend config does not override
    /// it: evaluations must be stable, generation and prompt rewriting want
    /// some variety.
    pub fn default_temperature(self) -> f64 {
        match self {
            Role::Evaluator => 0.0,
            Role::Generator | Role::Optimiser => 0.7,
        }
    }
}

impl core::str::FromStr for Role {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generator" => Ok(Role::Generator),
            "evaluator" => Ok(Role::Evaluator),
            "optimiser" | "optimizer" => Ok(Role::Optimiser),
            other => Err(GatewayError::UnknownRole(other.to_string())),
        }
    }
}

/// Which backend id serves each role. The same id may serve several roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub generator: String,
    pub evaluator: String,
    pub optimiser: String,
}

impl RoleAssignment {
    /// All three roles on a single backend.
    pub fn uniform(backend_id: &str) -> Self {
        Self {
            generator: backend_id.to_string(),
            evaluator: backend_id.to_string(),
            optimiser: backend_id.to_string(),
        }
    }

    pub fn backend_id(&self, role: Role) -> &str {
        match role {
            Role::Generator => &self.generator,
            Role::Evaluator => &self.evaluator,
            Role::Optimiser => &self.optimiser,
        }
    }
}

/// One completion call. `video_id` and `iteration` identify the loop step
/// the call belongs to; scripted mocks key on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: Role,
    pub video_id: String,
    pub iteration: u32,
    pub prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub backend_id: String,
    /// 1-based number of attempts actually made.
    pub attempt_count: u32,
    /// Wall time across all attempts, including backoff waits.
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited by backend (HTTP 429)")]
    RateLimited,
    #[error("backend server error (HTTP {status})")]
    Server { status: u16 },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("backend rejected request (HTTP {status}): {detail}")]
    Client { status: u16, detail: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("no scripted response for ({role}, {video_id}, {iteration}) and no default")]
    ScriptGap {
        role: &'static str,
        video_id: String,
        iteration: u32,
    },
}

impl BackendError {
    /// Timeouts, 429s, 5xx, and transport failures are worth retrying;
    /// everything else fails fast.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout
                | BackendError::RateLimited
                | BackendError::Server { .. }
                | BackendError::Transport(_)
        )
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("unknown role {0:?}")]
    UnknownRole(String),
    #[error("no backend configured under id {0:?}")]
    UnknownBackend(String),
    #[error("completion prompt is empty")]
    EmptyPrompt,
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: BackendError },
    #[error(transparent)]
    Backend(BackendError),
}

/// A single completion backend. `attempt` is the 1-based attempt number
/// supplied by the retry driver; scripted backends use it to simulate
/// transient failures without any internal state.
pub trait ChatBackend {
    fn complete(&self, request: &CompletionRequest, attempt: u32) -> Result<String, BackendError>;
}

/// The full gateway surface the prompt-refinement loop talks to: resolve the
/// role, enforce the rate cap, retry transient failures, return the text.
pub trait Completer {
    fn complete(
        &self,
        assignment: &RoleAssignment,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError>;
}

/// Time source. `sleep_ms` blocks the caller on a real clock and simply
/// advances a virtual one.
pub trait Clock {
    fn now_ms(&self) -> u64;
    fn sleep_ms(&self, ms: u64);
}

/// Deterministic clock for tests: `sleep_ms` advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now_ms: AtomicU64,
}

impl VirtualClock {
    pub fn new(start_ms: u64) -> Self {
        Self {
            now_ms: AtomicU64::new(start_ms),
        }
    }

    pub fn advance_ms(&self, ms: u64) {
        self.now_ms.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        self.now_ms.load(Ordering::SeqCst)
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance_ms(ms);
    }
}

/// One scripted mock response; the first `fail_times` attempts see a
/// transient server error before the text is returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub response: String,
    #[serde(default)]
    pub fail_times: u32,
}

/// A deterministic response table keyed by (role, video id, iteration).
/// Lookups are pure: the same key and attempt always produce the same
/// outcome.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockScript {
    entries: BTreeMap<(Role, String, u32), ScriptEntry>,
    default_response: Option<String>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(default_response: &str) -> Self {
        Self {
            entries: BTreeMap::new(),
            default_response: Some(default_response.to_string()),
        }
    }

    pub fn set_default(&mut self, default_response: &str) {
        self.default_response = Some(default_response.to_string());
    }

    pub fn insert(&mut self, role: Role, video_id: &str, iteration: u32, response: &str) {
        self.insert_entry(
            role,
            video_id,
            iteration,
            ScriptEntry {
                response: response.to_string(),
                fail_times: 0,
            },
        );
    }

    /// Scripts a response that fails `fail_times` attempts before answering.
    /// Use `u32::MAX` for a key that always fails.
    pub fn insert_flaky(
        &mut self,
        role: Role,
        video_id: &str,
        iteration: u32,
        response: &str,
        fail_times: u32,
    ) {
        self.insert_entry(
            role,
            video_id,
            iteration,
            ScriptEntry {
                response: response.to_string(),
                fail_times,
            },
        );
    }

    pub fn insert_entry(&mut self, role: Role, video_id: &str, iteration: u32, entry: ScriptEntry) {
        self.entries
            .insert((role, video_id.to_string(), iteration), entry);
    }

    pub fn lookup(
        &self,
        role: Role,
        video_id: &str,
        iteration: u32,
        attempt: u32,
    ) -> Result<String, BackendError> {
        match self.entries.get(&(role, video_id.to_string(), iteration)) {
            Some(entry) if attempt <= entry.fail_times => Err(BackendError::Server { status: 503 }),
            Some(entry) => Ok(entry.response.clone()),
            None => self
                .default_response
                .clone()
                .ok_or_else(|| BackendError::ScriptGap {
                    role: role.as_str(),
                    video_id: video_id.to_string(),
                    iteration,
                }),
        }
    }
}

/// Backend that answers from a [`MockScript`]. Stateless and therefore
/// trivially safe to share across threads.
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest, attempt: u32) -> Result<String, BackendError> {
        self.script
            .lookup(request.role, &request.video_id, request.iteration, attempt)
    }
}

/// Exponential backoff schedule: no delay before the first attempt, then
/// `base · 2^(attempt−2)` capped at `max_delay_ms`. Delays are therefore
/// non-decreasing in the attempt number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 200,
            max_delay_ms: 10_000,
        }
    }
}

impl RetryPolicy {
    /// Delay to wait before the given 1-based attempt.
    pub fn delay_before_attempt_ms(&self, attempt: u32) -> u64 {
        if attempt <= 1 {
            return 0;
        }
        let doublings = (attempt - 2).min(32);
        self.base_delay_ms
            .saturating_mul(1u64 << doublings)
            .min(self.max_delay_ms)
    }
}

/// Sliding-window rate limiter: at most `cap_per_second` dispatches within
/// any 1000 ms span. Purely timestamp-driven; callers supply the clock.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    cap_per_second: Option<u32>,
    dispatched_ms: VecDeque<u64>,
}

impl RateLimiter {
    /// `cap_per_second = None` disables limiting.
    pub fn new(cap_per_second: Option<u32>) -> Self {
        Self {
            cap_per_second,
            dispatched_ms: VecDeque::new(),
        }
    }

    /// Records a dispatch at `now_ms` and returns 0 if one is allowed,
    /// otherwise returns how long to wait before asking again.
    pub fn try_acquire(&mut self, now_ms: u64) -> u64 {
        let Some(cap) = self.cap_per_second else {
            return 0;
        };
        if cap == 0 {
            // A zero cap would block forever; treat it as "one per second".
            return self.with_cap(1, now_ms);
        }
        self.with_cap(cap, now_ms)
    }

    fn with_cap(&mut self, cap: u32, now_ms: u64) -> u64 {
        while let Some(&front) = self.dispatched_ms.front() {
            if front + 1000 <= now_ms {
                self.dispatched_ms.pop_front();
            } else {
                break;
            }
        }
        if (self.dispatched_ms.len() as u32) < cap {
            self.dispatched_ms.push_back(now_ms);
            0
        } else {
            let front = *self.dispatched_ms.front().expect("non-empty at cap");
            (front + 1000).saturating_sub(now_ms).max(1)
        }
    }
}

/// Blocks (via the clock) until the limiter grants a slot.
pub fn acquire_slot(limiter: &mut RateLimiter, clock: &dyn Clock) {
    loop {
        let wait = limiter.try_acquire(clock.now_ms());
        if wait == 0 {
            return;
        }
        clock.sleep_ms(wait);
    }
}

/// Drives one logical completion against a single backend: rate-limit gate,
/// exponential backoff between attempts, fail-fast on non-retryable errors.
///
/// `acquire` is called before every dispatched attempt; pass a closure that
/// blocks until the shared rate limiter grants a slot.
pub fn complete_with_retry(
    backend: &dyn ChatBackend,
    backend_id: &str,
    request: &CompletionRequest,
    policy: &RetryPolicy,
    clock: &dyn Clock,
    acquire: &mut dyn FnMut(),
) -> Result<CompletionResult, GatewayError> {
    if request.prompt.trim().is_empty() {
        return Err(GatewayError::EmptyPrompt);
    }
    let start = clock.now_ms();
    let max_attempts = policy.max_attempts.max(1);
    let mut last_error = None;
    for attempt in 1..=max_attempts {
        let delay = policy.delay_before_attempt_ms(attempt);
        if delay > 0 {
            clock.sleep_ms(delay);
        }
        acquire();
        match backend.complete(request, attempt) {
            Ok(text) => {
                return Ok(CompletionResult {
                    text,
                    backend_id: backend_id.to_string(),
                    attempt_count: attempt,
                    latency_ms: clock.now_ms().saturating_sub(start),
                });
            }
            Err(err) if err.is_retryable() => last_error = Some(err),
            Err(err) => return Err(GatewayError::Backend(err)),
        }
    }
    Err(GatewayError::RetriesExhausted {
        attempts: max_attempts,
        last: last_error.expect("at least one attempt ran"),
    })
}

/// Single-threaded [`Completer`] over a table of scripted backends. The
/// companion crate provides the thread-safe, HTTP-capable equivalent; this
/// one is enough for deterministic loop runs and tests.
pub struct ScriptedGateway {
    backends: BTreeMap<String, MockBackend>,
    policy: RetryPolicy,
    clock: VirtualClock,
    /// Virtual milliseconds charged per dispatched attempt.
    tick_ms: u64,
}

impl ScriptedGateway {
    pub fn new(script: MockScript, backend_id: &str) -> Self {
        let mut backends = BTreeMap::new();
        backends.insert(backend_id.to_string(), MockBackend::new(script));
        Self {
            backends,
            policy: RetryPolicy::default(),
            clock: VirtualClock::new(0),
            tick_ms: 1,
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn add_backend(&mut self, backend_id: &str, script: MockScript) {
        self.backends
            .insert(backend_id.to_string(), MockBackend::new(script));
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }
}

impl Completer for ScriptedGateway {
    fn complete(
        &self,
        assignment: &RoleAssignment,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        let id = assignment.backend_id(request.role);
        let backend = self
            .backends
            .get(id)
            .ok_or_else(|| GatewayError::UnknownBackend(id.to_string()))?;
        self.clock.advance_ms(self.tick_ms);
        complete_with_retry(backend, id, request, &self.policy, &self.clock, &mut || {})
    }
}
