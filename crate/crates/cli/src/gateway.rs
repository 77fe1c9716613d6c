//! The thread-safe gateway: a registry of backends behind the core
//! [`Completer`] trait, with a shared sliding-window rate limiter, per-backend
//! retry policies, and a pluggable clock.
//!
//! When every backend is a scripted mock the gateway runs on virtual time —
//! each dispatched attempt advances the clock by one tick — so repeated runs
//! produce byte-identical traces.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use sumforge_core::gateway::{
    acquire_slot, complete_with_retry, ChatBackend, Clock, Completer, CompletionRequest,
    CompletionResult, GatewayError, MockBackend, RateLimiter, RetryPolicy, RoleAssignment,
    VirtualClock,
};

use crate::config::{BackendKind, BackendsConfig, ConfigError};
use crate::http::HttpBackend;
use crate::io::{load_mock_script, IoError};

/// Wall-clock time via `Instant`; sleeping blocks the calling thread.
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(std::time::Duration::from_millis(ms));
    }
}

/// Virtual milliseconds charged per dispatched attempt in all-mock runs.
const MOCK_TICK_MS: u64 = 10;
const DEFAULT_TIMEOUT_MS: u64 = 30_000;

struct GatewayEntry {
    backend: Box<dyn ChatBackend + Send + Sync>,
    policy: RetryPolicy,
    temperature_override: Option<f64>,
}

/// Registry + retry + rate limiting behind [`Completer`]. Safe to share
/// across worker threads.
pub struct Gateway {
    entries: BTreeMap<String, GatewayEntry>,
    limiter: Mutex<RateLimiter>,
    clock: Arc<dyn Clock + Send + Sync>,
    /// Set when running on virtual time; advanced per dispatched attempt.
    virtual_clock: Option<Arc<VirtualClock>>,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayBuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl Gateway {
    /// Builds from a parsed config. All-mock configs run on virtual time;
    /// anything else uses the system clock.
    pub fn from_config(
        config: &BackendsConfig,
        rate_cap_override: Option<u32>,
    ) -> Result<Self, GatewayBuildError> {
        let mut entries = BTreeMap::new();
        for (id, spec) in &config.backends {
            let backend: Box<dyn ChatBackend + Send + Sync> = match spec.kind {
                BackendKind::Mock => {
                    let script = match config.script_path(spec) {
                        Some(path) => load_mock_script(&path, spec.default_response.as_deref())?,
                        None => sumforge_core::gateway::MockScript::with_default(
                            spec.default_response.as_deref().unwrap_or(""),
                        ),
                    };
                    Box::new(MockBackend::new(script))
                }
                BackendKind::OpenaiChat => Box::new(HttpBackend::new(
                    spec.endpoint.as_deref().expect("validated by config"),
                    spec.model.as_deref().expect("validated by config"),
                    spec.api_key_env.as_deref().expect("validated by config"),
                    spec.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
                )),
            };
            let default_policy = RetryPolicy::default();
            let policy = RetryPolicy {
                max_attempts: spec.max_attempts.unwrap_or(default_policy.max_attempts),
                base_delay_ms: spec.base_delay_ms.unwrap_or(default_policy.base_delay_ms),
                max_delay_ms: spec.max_delay_ms.unwrap_or(default_policy.max_delay_ms),
            };
            entries.insert(
                id.clone(),
                GatewayEntry {
                    backend,
                    policy,
                    temperature_override: spec.temperature,
                },
            );
        }
        let rate_cap = rate_cap_override.or(config.limits.requests_per_second);
        Ok(if config.all_mock() {
            Self::with_virtual_clock(entries, rate_cap)
        } else {
            Self {
                entries,
                limiter: Mutex::new(RateLimiter::new(rate_cap)),
                clock: Arc::new(SystemClock::new()),
                virtual_clock: None,
            }
        })
    }

    /// A gateway over a single scripted mock, on virtual time. Used by tests
    /// and anywhere a deterministic loop is wanted without a config file.
    pub fn scripted(
        backend_id: &str,
        script: sumforge_core::gateway::MockScript,
        rate_cap: Option<u32>,
    ) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            backend_id.to_string(),
            GatewayEntry {
                backend: Box::new(MockBackend::new(script)),
                policy: RetryPolicy::default(),
                temperature_override: None,
            },
        );
        Self::with_virtual_clock(entries, rate_cap)
    }

    fn with_virtual_clock(entries: BTreeMap<String, GatewayEntry>, rate_cap: Option<u32>) -> Self {
        let virtual_clock = Arc::new(VirtualClock::new(0));
        Self {
            entries,
            limiter: Mutex::new(RateLimiter::new(rate_cap)),
            clock: virtual_clock.clone(),
            virtual_clock: Some(virtual_clock),
        }
    }

    pub fn clock(&self) -> Arc<dyn Clock + Send + Sync> {
        self.clock.clone()
    }

    pub fn is_virtual(&self) -> bool {
        self.virtual_clock.is_some()
    }
}

impl Completer for Gateway {
    fn complete(
        &self,
        assignment: &RoleAssignment,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        let id = assignment.backend_id(request.role);
        let entry = self
            .entries
            .get(id)
            .ok_or_else(|| GatewayError::UnknownBackend(id.to_string()))?;
        let effective = match entry.temperature_override {
            Some(temperature) => CompletionRequest {
                temperature,
                ..request.clone()
            },
            None => request.clone(),
        };
        let mut acquire = || {
            loop {
                let wait = {
                    let mut limiter = self.limiter.lock().expect("limiter poisoned");
                    limiter.try_acquire(self.clock.now_ms())
                };
                if wait == 0 {
                    break;
                }
                self.clock.sleep_ms(wait);
            }
            if let Some(virtual_clock) = &self.virtual_clock {
                virtual_clock.advance_ms(MOCK_TICK_MS);
            }
        };
        complete_with_retry(
            entry.backend.as_ref(),
            id,
            &effective,
            &entry.policy,
            self.clock.as_ref(),
            &mut acquire,
        )
    }
}

/// Single-threaded convenience used by tests that need raw limiter access.
pub fn drain_rate_limiter(limiter: &mut RateLimiter, clock: &dyn Clock, n: usize) -> Vec<u64> {
    let mut stamps = Vec::with_capacity(n);
    for _ in 0..n {
        acquire_slot(limiter, clock);
        stamps.push(clock.now_ms());
    }
    stamps
}
