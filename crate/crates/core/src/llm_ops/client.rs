use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Result of one logical completion request, possibly after retries.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub reply: Result<String, LlmError>,
    /// Requests actually sent, including retries.
    pub attempts: u32,
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Completion;
}

/// In-process client answering with a closure; handy for tests and for
/// wiring scripted policies.
pub struct FnClient<F>(pub F);

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, messages: &[ChatMessage]) -> Completion {
        Completion {
            reply: (self.0)(messages),
            attempts: 1,
        }
    }
}

/// Time source for rate limiting and backoff.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that only moves when slept on.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn sleep(&self, d: Duration) {
        *self.now.lock().unwrap_or_else(|p| p.into_inner()) += d;
    }
}

const WINDOW: Duration = Duration::from_secs(60);

/// Sliding-window limiter: at most `rpm` acquisitions in any 60 s window.
pub struct RateLimiter {
    rpm: u32,
    clock: Arc<dyn Clock>,
    sent: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(rpm: u32, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            rpm: rpm.max(1),
            clock,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a request may be sent and returns its timestamp.
    pub fn acquire(&self) -> Duration {
        loop {
            let wait = {
                let mut sent = self.sent.lock().unwrap_or_else(|p| p.into_inner());
                let now = self.clock.now();
                while sent.front().is_some_and(|&t| t + WINDOW <= now) {
                    sent.pop_front();
                }
                if sent.len() < self.rpm as usize {
                    sent.push_back(now);
                    return now;
                }
                *sent.front().expect("window is full") + WINDOW - now
            };
            self.clock.sleep(wait);
        }
    }
}

fn default_temperature() -> f64 {
    0.7
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_rpm() -> u32 {
    60
}
fn default_backoff() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}

/// Chat-completions endpoint description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmEndpoint {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; no auth header if unset.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_rpm")]
    pub rpm: u32,
    /// First retry delay; doubles on every further retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Maximum concurrent in-flight requests.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

impl LlmEndpoint {
    pub fn new(base_url: &str, model: &str) -> Self {
        LlmEndpoint {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            temperature: default_temperature(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            rpm: default_rpm(),
            backoff_ms: default_backoff(),
            concurrency: default_concurrency(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: &str| Err(LlmError::InvalidEndpoint(m.into()));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad("base_url must start with http:// or https://");
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad("timeout_secs must be positive");
        }
        if self.rpm == 0 {
            return bad("rpm must be positive");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be positive");
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

/// Blocking HTTP client for the chat-completions contract.
pub struct HttpChatClient {
    endpoint: LlmEndpoint,
    http: reqwest::blocking::Client,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    token: Option<String>,
}

impl HttpChatClient {
    pub fn new(endpoint: LlmEndpoint) -> Result<Self, LlmError> {
        HttpChatClient::with_clock(endpoint, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(endpoint: LlmEndpoint, clock: Arc<dyn Clock>) -> Result<Self, LlmError> {
        endpoint.validate()?;
        let token = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingKey(var.clone()))?),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(endpoint.timeout_secs))
            .build()
            .map_err(|e| LlmError::Network(e.to_string()))?;
        Ok(HttpChatClient {
            limiter: RateLimiter::new(endpoint.rpm, clock.clone()),
            endpoint,
            http,
            clock,
            token,
        })
    }

    fn send_once(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.limiter.acquire();
        let body = ChatRequest {
            model: &self.endpoint.model,
            messages,
            temperature: self.endpoint.temperature,
        };
        let mut req = self.http.post(self.endpoint.url()).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| LlmError::Network(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Http {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::BadResponse("no choices".into()))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Completion {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let reply = self.send_once(messages);
            let retry = match &reply {
                Err(e) => e.is_transient() && attempts <= self.endpoint.max_retries,
                Ok(_) => false,
            };
            if !retry {
                return Completion { reply, attempts };
            }
            let delay = self.endpoint.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
            log::warn!("LLM request failed ({:?}); retrying in {delay} ms", reply.err());
            self.clock.sleep(Duration::from_millis(delay));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiter_never_exceeds_rpm_in_any_window() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(3, clock.clone());
        let stamps: Vec<Duration> = (0..10).map(|_| limiter.acquire()).collect();
        for (i, &t) in stamps.iter().enumerate() {
            let in_window = stamps[i..].iter().filter(|&&u| u < t + WINDOW).count();
            assert!(in_window <= 3);
        }
        assert_eq!(stamps[3], Duration::from_secs(60));
        assert_eq!(stamps[9], Duration::from_secs(180));
    }

    #[test]
    fn endpoint_validation() {
        let mut ep = LlmEndpoint::new("http://localhost:1", "m");
        assert!(ep.validate().is_ok());
        ep.rpm = 0;
        assert!(ep.validate().is_err());
        let mut ep = LlmEndpoint::new("localhost", "m");
        assert!(ep.validate().is_err());
        ep.base_url = "https://x/v1/".into();
        assert_eq!(ep.url(), "https://x/v1/chat/completions");
    }
}
