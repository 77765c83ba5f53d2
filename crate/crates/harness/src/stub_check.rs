//! Wire-protocol conformance checks against a running evaluator server.
//!
//! A fixture is a JSON-lines file; each line holds the endpoint path, the
//! request body and the response the server is expected to give:
//!
//! ```text
//! {"path": "/v1/value", "request": {"state": "6 6 6 6"}, "response": {"value": 1.0}}
//! ```
//!
//! Requests are replayed in file order through the regular client.

use std::path::Path;

use rescale_core::env::Game24;
use rescale_core::evaluators::remote::{parse_propose_response, parse_value_response};
use rescale_core::evaluators::RemoteEvaluator;
use rescale_core::{Environment, EvalError, Evaluator};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::HarnessError;

const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub path: String,
    pub request: Value,
    pub response: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, outcome: Result<String, String>) -> Self {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

pub fn load_fixture(path: &Path) -> Result<Vec<FixtureEntry>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fixture(&text)
}

pub fn parse_fixture(text: &str) -> Result<Vec<FixtureEntry>, HarnessError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Conformance(format!("fixture line {}: {e}", i + 1)))
        })
        .collect()
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, String> {
    v.get(key).ok_or_else(|| format!("request lacks {key:?}"))
}

fn check_entry(client: &RemoteEvaluator, entry: &FixtureEntry) -> Result<String, String> {
    let expected = entry.response.to_string();
    let wants_error = entry.response.get("error").is_some();
    let state = field(&entry.request, "state")?
        .as_str()
        .ok_or("request state is not a string")?;
    match entry.path.as_str() {
        "/v1/propose" => {
            let w = field(&entry.request, "w")?
                .as_u64()
                .ok_or("request w is not an integer")? as usize;
            let t = field(&entry.request, "temperature")?
                .as_f64()
                .ok_or("request temperature is not a number")?;
            let got = client.propose_with_temperature(state, w, t);
            if wants_error {
                return expect_error(got.map(|p| format!("{p:?}")));
            }
            let want = parse_propose_response(&expected).map_err(|e| format!("fixture response invalid: {e}"))?;
            let got = got.map_err(|e| e.to_string())?;
            if got.len() != want.len() {
                return Err(format!("expected {} actions, got {}", want.len(), got.len()));
            }
            for (g, w) in got.iter().zip(&want) {
                if g.action_text != w.action_text || (g.raw_prob - w.raw_prob).abs() > TOLERANCE * w.raw_prob.max(1.0) {
                    return Err(format!("expected {w:?}, got {g:?}"));
                }
            }
            Ok(format!("{} actions", got.len()))
        }
        "/v1/value" => {
            let got = client.raw_value(state);
            if wants_error {
                return expect_error(got.map(|v| v.to_string()));
            }
            let want = parse_value_response(&expected).map_err(|e| format!("fixture response invalid: {e}"))?;
            let got = got.map_err(|e| e.to_string())?;
            if (got - want).abs() > TOLERANCE {
                return Err(format!("expected value {want}, got {got}"));
            }
            Ok(format!("value {got}"))
        }
        p => Err(format!("unknown path {p:?}")),
    }
}

fn expect_error(got: Result<String, EvalError>) -> Result<String, String> {
    match got {
        Err(e) => Ok(format!("error as expected: {e}")),
        Ok(v) => Err(format!("expected an error response, got {v}")),
    }
}

/// Replays every fixture entry in order.
pub fn check_fixture(client: &RemoteEvaluator, entries: &[FixtureEntry]) -> Vec<CheckResult> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let state = e.request.get("state").and_then(Value::as_str).unwrap_or("?");
            CheckResult::new(
                format!("fixture #{} {} {state:?}", i + 1, e.path),
                check_entry(client, e),
            )
        })
        .collect()
}

/// Checks a server that evaluates Game24 exactly: known values and legal,
/// width-bounded proposals.
pub fn check_game24(client: &RemoteEvaluator) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (state, want) in [("6 6 6 6", 1.0), ("1 1 1 1", 0.0)] {
        let r = client.value(state).map_err(|e| e.to_string()).and_then(|v| {
            if v == want {
                Ok(format!("value {v}"))
            } else {
                Err(format!("expected {want}, got {v}"))
            }
        });
        out.push(CheckResult::new(format!("game24 value {state:?}"), r));
    }
    let mut rng = rescale_core::rng::stream(0, &[]);
    let r = client
        .propose("6 6 6 6", 2, &mut rng)
        .map_err(|e| e.to_string())
        .and_then(|props| {
            if props.is_empty() || props.len() > 2 {
                return Err(format!("expected 1 or 2 actions, got {}", props.len()));
            }
            let start = rescale_core::env::Game24State::from_ints(&[6, 6, 6, 6]);
            for p in &props {
                Game24
                    .step(&start, &p.action_text)
                    .map_err(|e| format!("illegal action: {e}"))?;
                if !(p.raw_prob.is_finite() && p.raw_prob > 0.0) {
                    return Err(format!("bad probability for {:?}", p.action_text));
                }
            }
            Ok(format!("{} legal actions", props.len()))
        });
    out.push(CheckResult::new("game24 propose \"6 6 6 6\" w=2", r));
    out
}
