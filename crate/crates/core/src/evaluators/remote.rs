//! HTTP client for an external policy/value server.
//!
//! Wire protocol (UTF-8 JSON over HTTP/1.1):
//!
//! ```text
//! POST /v1/propose  {"state": str, "w": int, "temperature": num}
//!                -> {"actions": [{"text": str, "logprob": num}, ...]}
//! POST /v1/value    {"state": str}
//!                -> {"value": num}
//! ```
//!
//! A non-200 status or a `{"error": str}` body is an error. Log-probabilities
//! are converted to raw probabilities client side.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::RngCore;
use serde::Serialize;
use serde_json::Value;

use super::{EvalError, Evaluator, Proposal};

pub const PROPOSE_PATH: &str = "/v1/propose";
pub const VALUE_PATH: &str = "/v1/value";

const EXCERPT_LEN: usize = 200;

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub attempts: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            temperature: 1.0,
            timeout: Duration::from_secs(30),
            max_in_flight: 8,
            attempts: 3,
            backoff: Duration::from_millis(100),
        }
    }
}

#[derive(Serialize)]
struct ProposeRequest<'a> {
    state: &'a str,
    w: usize,
    temperature: f64,
}

#[derive(Serialize)]
struct ValueRequest<'a> {
    state: &'a str,
}

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct PermitGuard<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteEvaluator {
    config: RemoteConfig,
    agent: ureq::Agent,
    permits: Permits,
    clamped: AtomicU64,
}

fn excerpt(s: &str) -> String {
    let mut out: String = s.chars().take(EXCERPT_LEN).collect();
    if s.chars().count() > EXCERPT_LEN {
        out.push('…');
    }
    out
}

fn protocol(message: impl Into<String>, payload: &str) -> EvalError {
    EvalError::Protocol {
        message: message.into(),
        excerpt: excerpt(payload),
    }
}

/// Parses a propose response body into proposals.
pub fn parse_propose_response(body: &str) -> Result<Vec<Proposal>, EvalError> {
    let v = parse_body(body)?;
    let actions = v
        .get("actions")
        .and_then(Value::as_array)
        .ok_or_else(|| protocol("missing \"actions\" array", body))?;
    if actions.is_empty() {
        return Err(protocol("empty action list", body));
    }
    actions
        .iter()
        .map(|a| {
            let text = a
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| protocol("action without string \"text\"", body))?;
            let logprob = a
                .get("logprob")
                .and_then(Value::as_f64)
                .ok_or_else(|| protocol("action without numeric \"logprob\"", body))?;
            Ok(Proposal::new(text, logprob.exp().max(f64::MIN_POSITIVE)))
        })
        .collect()
}

/// Parses a value response body; returns the value as sent (unclamped).
pub fn parse_value_response(body: &str) -> Result<f64, EvalError> {
    let v = parse_body(body)?;
    v.get("value")
        .and_then(Value::as_f64)
        .ok_or_else(|| protocol("missing numeric \"value\"", body))
}

fn parse_body(body: &str) -> Result<Value, EvalError> {
    let v: Value = serde_json::from_str(body).map_err(|e| protocol(format!("invalid JSON: {e}"), body))?;
    if let Some(err) = v.get("error") {
        let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
        return Err(protocol(format!("server error: {msg}"), body));
    }
    if !v.is_object() {
        return Err(protocol("response is not a JSON object", body));
    }
    Ok(v)
}

impl RemoteEvaluator {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Permits {
            free: Mutex::new(config.max_in_flight.max(1)),
            cv: Condvar::new(),
        };
        Self {
            config,
            agent,
            permits,
            clamped: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Number of value responses that had to be clamped into `[0, 1]`.
    pub fn clamped_values(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    /// POSTs `body` and returns the 200 response text. Transport failures are
    /// retried with exponential backoff; HTTP errors are not.
    fn post(&self, path: &str, body: &impl Serialize) -> Result<String, EvalError> {
        let _permit = self.permits.acquire();
        let url = self.url(path);
        let attempts = self.config.attempts.max(1);
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| protocol(format!("unreadable body: {e}"), ""))?;
                    if status != 200 {
                        return Err(EvalError::Status {
                            status,
                            excerpt: excerpt(&text),
                        });
                    }
                    return Ok(text);
                }
                Err(e) => {
                    last = e.to_string();
                    tracing::debug!(%url, attempt, error = %last, "request failed");
                    if attempt < attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(EvalError::Network {
            url,
            attempts,
            message: last,
        })
    }

    pub fn propose_with_temperature(
        &self,
        state: &str,
        width: usize,
        temperature: f64,
    ) -> Result<Vec<Proposal>, EvalError> {
        let body = self.post(
            PROPOSE_PATH,
            &ProposeRequest {
                state,
                w: width,
                temperature,
            },
        )?;
        parse_propose_response(&body)
    }

    /// Value as reported by the server, before clamping.
    pub fn raw_value(&self, state: &str) -> Result<f64, EvalError> {
        let body = self.post(VALUE_PATH, &ValueRequest { state })?;
        parse_value_response(&body)
    }
}

impl Evaluator for RemoteEvaluator {
    fn propose(&self, state: &str, width: usize, _rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        self.propose_with_temperature(state, width, self.config.temperature)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        let v = self.raw_value(state)?;
        if !(0.0..=1.0).contains(&v) {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            tracing::warn!(state, value = v, "value out of [0, 1]; clamping");
        }
        Ok(v.clamp(0.0, 1.0))
    }
}
