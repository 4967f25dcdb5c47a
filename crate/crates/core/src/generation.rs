//! Generation client: sends assembled prompts to a continuation backend.
//!
//! Wire protocol, `POST {endpoint}/generate`:
//!
//! ```text
//! request  {"style": "sep"|"plain", "prompt": str, "max_new_tokens": int,
//!           "decode": "greedy" | {"sampled": {"seed": int}}}
//! 200      {"continuation": str, "backend_id": str}
//! 4xx/5xx  {"error": str}
//! ```
//!
//! The continuation never includes the prompt; backends strip any echo.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptStyle;

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 128;
pub const ENDPOINT_ENV: &str = "TABCAP_ENDPOINT";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decode {
    #[default]
    Greedy,
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRequest {
    pub style: PromptStyle,
    pub prompt: String,
    pub max_new_tokens: u32,
    pub decode: Decode,
}

impl GenRequest {
    pub fn greedy(style: PromptStyle, prompt: impl Into<String>) -> Self {
        Self { style, prompt: prompt.into(), max_new_tokens: DEFAULT_MAX_NEW_TOKENS, decode: Decode::Greedy }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.prompt.trim().is_empty() {
            return Err(GenError::InvalidRequest("empty prompt".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(GenError::InvalidRequest("max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// Success body of the wire protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub continuation: String,
    pub backend_id: String,
}

/// Error body of the wire protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResponse {
    pub continuation: String,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("cannot reach backend: {0}")]
    Unreachable(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend returned status {status}: {body}")]
    Backend { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<GenError> },
}

impl GenError {
    /// Failures worth retrying: timeouts, connection trouble, overload and gateway statuses.
    pub fn is_transient(&self) -> bool {
        match self {
            GenError::Timeout(_) | GenError::Unreachable(_) => true,
            GenError::Backend { status, .. } => matches!(status, 429 | 502 | 503 | 504),
            _ => false,
        }
    }

    /// The underlying failure, looking through retry exhaustion.
    pub fn root(&self) -> &GenError {
        match self {
            GenError::RetriesExhausted { last, .. } => last.root(),
            other => other,
        }
    }
}

/// Something that turns one request into one continuation.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn call(&self, request: &GenRequest) -> Result<WireResponse, GenError>;
}

type FailurePredicate = dyn Fn(&GenRequest) -> bool + Send + Sync;

/// Deterministic offline backend.
///
/// The continuation is the first 20 whitespace tokens of the prompt in
/// reverse order (fewer if `max_new_tokens` is smaller). Tracks the number of
/// concurrent calls so tests can observe the parallelism bound.
pub struct StubBackend {
    delay: Duration,
    fail_when: Option<Box<FailurePredicate>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    calls: AtomicUsize,
}

pub const STUB_BACKEND_ID: &str = "stub-reverse-20";
const STUB_TOKENS: usize = 20;

impl Default for StubBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl StubBackend {
    pub fn new() -> Self {
        Self {
            delay: Duration::ZERO,
            fail_when: None,
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Sleep this long inside every call.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// Answer 500 for requests matching `predicate`.
    pub fn failing_when(mut self, predicate: impl Fn(&GenRequest) -> bool + Send + Sync + 'static) -> Self {
        self.fail_when = Some(Box::new(predicate));
        self
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn continuation(request: &GenRequest) -> String {
        let limit = STUB_TOKENS.min(request.max_new_tokens as usize);
        let mut words: Vec<&str> = request.prompt.split_whitespace().take(limit).collect();
        words.reverse();
        words.join(" ")
    }
}

impl Backend for StubBackend {
    fn id(&self) -> &str {
        STUB_BACKEND_ID
    }

    fn call(&self, request: &GenRequest) -> Result<WireResponse, GenError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let result = match &self.fail_when {
            Some(fail) if fail(request) => Err(GenError::Backend { status: 500, body: "injected failure".into() }),
            _ => Ok(WireResponse { continuation: Self::continuation(request), backend_id: STUB_BACKEND_ID.into() }),
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

const BODY_EXCERPT: usize = 200;

/// Backend reached over HTTP.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    timeout: Duration,
}

impl HttpBackend {
    /// `endpoint` is the service base URL; `/generate` is appended unless already present.
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, GenError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GenError::Unreachable(e.to_string()))?;
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/generate") { base.to_string() } else { format!("{base}/generate") };
        Ok(Self { client, url, timeout })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.url
    }

    fn call(&self, request: &GenRequest) -> Result<WireResponse, GenError> {
        let response = self.client.post(&self.url).json(request).send().map_err(|e| {
            if e.is_timeout() {
                GenError::Timeout(self.timeout.as_millis() as u64)
            } else {
                GenError::Unreachable(e.to_string())
            }
        })?;
        let status = response.status();
        let body = response.text().map_err(|e| {
            if e.is_timeout() {
                GenError::Timeout(self.timeout.as_millis() as u64)
            } else {
                GenError::Protocol(e.to_string())
            }
        })?;
        if !status.is_success() {
            let message = serde_json::from_str::<WireError>(&body).map(|e| e.error).unwrap_or(body);
            return Err(GenError::Backend { status: status.as_u16(), body: message.chars().take(BODY_EXCERPT).collect() });
        }
        serde_json::from_str::<WireResponse>(&body).map_err(|e| GenError::Protocol(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientConfig {
    /// Extra attempts after the first for transient failures.
    pub retries: u32,
    /// Delay before the first retry; doubles on each subsequent one.
    pub backoff: Duration,
    /// Upper bound on requests in flight during a batch.
    pub parallelism: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self { retries: 2, backoff: Duration::from_millis(100), parallelism: 4 }
    }
}

/// Retrying, bounded-parallelism front end over a [`Backend`]. Safe to share across threads.
#[derive(Clone)]
pub struct GenerationClient {
    backend: Arc<dyn Backend>,
    config: ClientConfig,
}

impl GenerationClient {
    pub fn new(backend: Arc<dyn Backend>, config: ClientConfig) -> Self {
        let config = ClientConfig { parallelism: config.parallelism.max(1), ..config };
        Self { backend, config }
    }

    pub fn stub() -> Self {
        Self::new(Arc::new(StubBackend::new()), ClientConfig::default())
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn generate(&self, request: &GenRequest) -> Result<GenResponse, GenError> {
        request.validate()?;
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            match self.backend.call(request) {
                Ok(wire) => {
                    return Ok(GenResponse {
                        continuation: wire.continuation,
                        backend_id: wire.backend_id,
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(err) if err.is_transient() && attempt < self.config.retries => {
                    thread::sleep(self.config.backoff.saturating_mul(1 << attempt.min(16)));
                    attempt += 1;
                }
                Err(err) if err.is_transient() => {
                    return Err(GenError::RetriesExhausted { attempts: attempt + 1, last: Box::new(err) })
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Run every request with at most `parallelism` in flight. Results line
    /// up with `requests` index for index; one failure never aborts the rest.
    pub fn generate_batch(&self, requests: &[GenRequest]) -> Vec<Result<GenResponse, GenError>> {
        let workers = self.config.parallelism.min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.generate(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<GenResponse, GenError>>>> = Mutex::new(vec![None; requests.len()]);
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(request) = requests.get(i) else { break };
                    let result = self.generate(request);
                    slots.lock().expect("result slots poisoned")[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|slot| slot.expect("every request produces a result"))
            .collect()
    }
}
