//! Chat-completion style HTTP backend.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{BackendError, ExpertBackend};
use super::prompt::PromptBundle;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    pub url: String,
    pub model: String,
    /// JSON pointer to the response text, e.g. `/choices/0/message/content`.
    pub response_path: String,
    pub timeout_ms: u64,
    /// Attempts after the first one, for transport failures, 429 and 5xx.
    pub max_retries: u32,
    /// First backoff delay; doubles after every failed attempt.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub auth_header: Option<String>,
    /// Environment variable holding the auth header value.
    pub auth_env: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            model: String::new(),
            response_path: "/choices/0/message/content".into(),
            timeout_ms: 60_000,
            max_retries: 3,
            backoff_ms: 500,
            max_in_flight: 4,
            auth_header: None,
            auth_env: None,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

/// One POST per prompt: `{model, messages: [system, user]}`. The market
/// attachment travels only as the placeholder text already in the prompt.
#[derive(Debug)]
pub struct RemoteBackend {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    auth: Option<(String, String)>,
    gate: Gate,
}

enum Attempt {
    Done(String),
    Retry(BackendError),
    Fail(BackendError),
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Result<Self, BackendError> {
        if cfg.url.is_empty() {
            return Err(BackendError::Setup("remote backend needs a url".into()));
        }
        if cfg.max_in_flight == 0 {
            return Err(BackendError::Setup("max_in_flight must be at least 1".into()));
        }
        let auth = match (&cfg.auth_header, &cfg.auth_env) {
            (Some(h), Some(var)) => {
                let v = std::env::var(var).map_err(|_| BackendError::Setup(format!("environment variable {var} is not set")))?;
                Some((h.clone(), v))
            }
            (None, None) => None,
            _ => return Err(BackendError::Setup("auth_header and auth_env must be set together".into())),
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { free: Mutex::new(cfg.max_in_flight), cv: Condvar::new() };
        Ok(Self { cfg, agent, auth, gate })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let _slot = self.gate.enter();
        let mut req = self.agent.post(&self.cfg.url).header("content-type", "application/json");
        if let Some((h, v)) = &self.auth {
            req = req.header(h.as_str(), v.as_str());
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout),
            Err(e @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                return Attempt::Retry(BackendError::Transport(e.to_string()))
            }
            Err(e) => return Attempt::Fail(BackendError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(BackendError::Status { status, body: text });
        }
        if !(200..300).contains(&status) {
            return Attempt::Fail(BackendError::Status { status, body: text });
        }
        let parsed: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Fail(BackendError::BadResponse(e.to_string())),
        };
        match parsed.pointer(&self.cfg.response_path).and_then(Value::as_str) {
            Some(s) => Attempt::Done(s.to_string()),
            None => Attempt::Fail(BackendError::BadResponse(format!("no string at {}", self.cfg.response_path))),
        }
    }
}

impl ExpertBackend for RemoteBackend {
    fn answer(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": bundle.instruction},
                {"role": "user", "content": bundle.prompt},
            ],
        });
        let mut delay = self.cfg.backoff_ms;
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.cfg.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!("remote attempt {} failed: {e}; retrying in {delay} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }

    fn identity(&self) -> String {
        format!("remote:{}@{}", self.cfg.model, self.cfg.url)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
