//! Chat-completion gateway.
//!
//! A [`Backend`] performs one attempt; [`Gateway`] adds retry with
//! exponential backoff, bounded batch execution and call accounting.
//! Backends include an OpenAI-compatible HTTP client and a record/replay
//! [`Cassette`] for offline runs.

mod cassette;
mod http;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cassette::{request_hash, Cassette, CassetteEntry, CassetteMode};
pub use http::{HttpBackend, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};

pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const GPT_TEMPERATURE: f64 = 0.0;
pub const LLAMA_TEMPERATURE: f64 = 0.0001;

/// Decoding temperature used for a model family unless overridden.
pub fn default_temperature(model_name: &str) -> f64 {
    if model_name.to_lowercase().contains("llama") {
        LLAMA_TEMPERATURE
    } else {
        GPT_TEMPERATURE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_message: String,
    pub user_message: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, model_name: &str) -> Self {
        Self {
            system_message: system.into(),
            user_message: user.into(),
            temperature: default_temperature(model_name),
            max_tokens: DEFAULT_MAX_TOKENS,
            model_name: model_name.to_string(),
        }
    }

    pub fn hash(&self) -> String {
        request_hash(&self.system_message, &self.user_message)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.system_message.trim().is_empty() && self.user_message.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("both messages are empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub attempts: u32,
    pub latency_ms: u64,
    pub backend_id: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("no cassette entry for request {hash}")]
    CassetteMiss { hash: String },
    #[error("request {hash} matches {count} cassette entries")]
    CassetteAmbiguous { hash: String, count: usize },
    #[error("cassette error: {0}")]
    Cassette(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<GatewayError> },
}

impl GatewayError {
    /// Timeouts, connection failures, 5xx and 429 are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Transport(_) | GatewayError::Timeout => true,
            GatewayError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// One completion attempt against some model endpoint.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).send(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 1000,
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): base * factor^retry.
    pub fn delay(&self, retry: u32) -> Duration {
        let mult = (self.factor as u64).saturating_pow(retry);
        Duration::from_millis(self.base_delay_ms.saturating_mul(mult))
    }
}

/// Retrying, call-counting front end over a [`Backend`]. Cheap to clone and
/// shareable across threads.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    policy: RetryPolicy,
    sleeper: Arc<dyn Fn(Duration) + Send + Sync>,
    calls: Arc<AtomicUsize>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.id())
            .field("policy", &self.policy)
            .field("calls", &self.call_count())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self::from_arc(Arc::new(backend))
    }

    pub fn from_arc(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            policy: RetryPolicy::default(),
            sleeper: Arc::new(std::thread::sleep),
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Replaces the backoff sleep, e.g. to record delays in tests.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn policy(&self) -> RetryPolicy {
        self.policy
    }

    /// Logical completions requested so far (retries not counted).
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.backend.send(request) {
                Ok(text) => {
                    return Ok(ChatResponse {
                        text,
                        attempts,
                        latency_ms: started.elapsed().as_millis() as u64,
                        backend_id: self.backend.id().to_string(),
                    })
                }
                Err(err) if err.is_retryable() => {
                    if attempts > self.policy.max_retries {
                        tracing::error!(attempts, error = %err, "retries exhausted");
                        return Err(GatewayError::Exhausted {
                            attempts,
                            last: Box::new(err),
                        });
                    }
                    let delay = self.policy.delay(attempts - 1);
                    tracing::warn!(attempt = attempts, delay_ms = delay.as_millis() as u64, error = %err, "retrying");
                    (self.sleeper)(delay);
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Runs every request with at most `parallelism` in flight. Output order
    /// matches input order; failures stay in their slot.
    pub fn run_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        parallel_map(requests, parallelism, |req| self.complete(req))
    }
}

/// Ordered map over `items` with at most `parallelism` workers.
pub fn parallel_map<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = parallelism.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    struct Flaky {
        failures_left: Mutex<u32>,
        error: GatewayError,
    }

    impl Backend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn send(&self, _: &ChatRequest) -> Result<String, GatewayError> {
            let mut left = self.failures_left.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                Err(self.error.clone())
            } else {
                Ok("ok".into())
            }
        }
    }

    fn req(user: &str) -> ChatRequest {
        ChatRequest::new("sys", user, "gpt-4")
    }

    fn recording_gateway(b: impl Backend + 'static) -> (Gateway, Arc<Mutex<Vec<Duration>>>) {
        let delays = Arc::new(Mutex::new(Vec::new()));
        let sink = delays.clone();
        let gw = Gateway::new(b).with_sleeper(move |d| sink.lock().unwrap().push(d));
        (gw, delays)
    }

    #[test]
    fn temperature_defaults_by_family() {
        assert_eq!(default_temperature("gpt-4"), 0.0);
        assert_eq!(default_temperature("Llama-2-7b-chat"), 0.0001);
        assert_eq!(req("x").max_tokens, 1024);
    }

    #[test]
    fn two_failures_then_success_takes_three_attempts() {
        let (gw, delays) = recording_gateway(Flaky {
            failures_left: Mutex::new(2),
            error: GatewayError::Http { status: 503, message: "busy".into() },
        });
        let resp = gw.complete(&req("x")).unwrap();
        assert_eq!(resp.attempts, 3);
        assert_eq!(resp.text, "ok");
        assert_eq!(
            *delays.lock().unwrap(),
            [Duration::from_secs(1), Duration::from_secs(2)]
        );
    }

    #[test]
    fn exhausted_after_retry_limit() {
        let (gw, delays) = recording_gateway(Flaky {
            failures_left: Mutex::new(10),
            error: GatewayError::Timeout,
        });
        match gw.complete(&req("x")) {
            Err(GatewayError::Exhausted { attempts, .. }) => assert_eq!(attempts, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(delays.lock().unwrap().len(), 3);
        assert_eq!(delays.lock().unwrap()[2], Duration::from_secs(4));
    }

    #[test]
    fn client_errors_not_retried() {
        let (gw, delays) = recording_gateway(Flaky {
            failures_left: Mutex::new(1),
            error: GatewayError::Http { status: 401, message: "nope".into() },
        });
        assert!(matches!(gw.complete(&req("x")), Err(GatewayError::Http { status: 401, .. })));
        assert!(delays.lock().unwrap().is_empty());
    }

    #[test]
    fn rate_limit_is_retryable() {
        assert!(GatewayError::Http { status: 429, message: String::new() }.is_retryable());
        assert!(!GatewayError::Http { status: 404, message: String::new() }.is_retryable());
        assert!(!GatewayError::CassetteMiss { hash: "h".into() }.is_retryable());
    }

    #[test]
    fn invalid_request_rejected_before_sending() {
        let gw = Gateway::new(Flaky { failures_left: Mutex::new(0), error: GatewayError::Timeout });
        let mut r = req("x");
        r.temperature = -1.0;
        assert!(matches!(gw.complete(&r), Err(GatewayError::InvalidRequest(_))));
        r.temperature = 0.0;
        r.max_tokens = 0;
        assert!(gw.complete(&r).is_err());
        assert_eq!(gw.call_count(), 0);
    }

    struct Probe {
        in_flight: AtomicUsize,
        peak: AtomicUsize,
        seed: u64,
    }

    impl Backend for Probe {
        fn id(&self) -> &str {
            "probe"
        }
        fn send(&self, r: &ChatRequest) -> Result<String, GatewayError> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            let n: u64 = r.user_message.parse().unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed ^ n);
            std::thread::sleep(Duration::from_micros(rng.gen_range(0..2000)));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            if n == 2 {
                Err(GatewayError::Http { status: 400, message: "bad".into() })
            } else {
                Ok(format!("reply {n}"))
            }
        }
    }

    #[test]
    fn batch_order_and_bounded_concurrency() {
        let probe = Arc::new(Probe { in_flight: AtomicUsize::new(0), peak: AtomicUsize::new(0), seed: 7 });
        let gw = Gateway::from_arc(probe.clone());
        let requests: Vec<_> = (0..100).map(|i| req(&i.to_string())).collect();
        let out = gw.run_batch(&requests, 4);
        assert_eq!(out.len(), 100);
        for (i, r) in out.iter().enumerate() {
            if i == 2 {
                assert!(r.is_err());
            } else {
                assert_eq!(r.as_ref().unwrap().text, format!("reply {i}"));
            }
        }
        let peak = probe.peak.load(Ordering::SeqCst);
        assert!(peak <= 4, "peak {peak}");
        assert_eq!(gw.call_count(), 100);
    }

    #[test]
    fn parallel_map_handles_empty_and_single() {
        let empty: Vec<u32> = vec![];
        assert!(parallel_map(&empty, 3, |x| *x).is_empty());
        assert_eq!(parallel_map(&[5u32], 8, |x| x * 2), [10]);
    }
}
