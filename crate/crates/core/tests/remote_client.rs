use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rescale_core::env::{Game24, Game24State};
use rescale_core::evaluators::{EvalError, Evaluator, Game24Oracle, OracleEvaluator, RemoteConfig, RemoteEvaluator};
use rescale_core::{decode_episode, SearchConfig};
use serde_json::{json, Value};

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server on an ephemeral port; records `(path, body)`.
struct Stub {
    url: String,
    log: Arc<Mutex<Vec<(String, Value)>>>,
}

fn serve_conn(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<(String, Value)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut stream = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
        let mut len = 0usize;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h).unwrap();
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0u8; len];
        reader.read_exact(&mut body).unwrap();
        let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        log.lock().unwrap().push((path.clone(), body.clone()));
        let (status, payload) = handler(&path, &body);
        let resp = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if stream.write_all(resp.as_bytes()).is_err() {
            return;
        }
    }
}

impl Stub {
    fn start(handler: impl Fn(&str, &Value) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let log = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread_log = log.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (h, l) = (handler.clone(), thread_log.clone());
                std::thread::spawn(move || serve_conn(stream, &*h, &l));
            }
        });
        Self { url, log }
    }

    fn client(&self) -> RemoteEvaluator {
        let mut cfg = RemoteConfig::new(&self.url);
        cfg.timeout = Duration::from_secs(5);
        cfg.backoff = Duration::from_millis(1);
        RemoteEvaluator::new(cfg)
    }

    fn requests(&self) -> Vec<(String, Value)> {
        self.log.lock().unwrap().clone()
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[test]
fn propose_round_trip() {
    let stub = Stub::start(|_, _| {
        (
            200,
            json!({"actions": [
                {"text": "a", "logprob": -1.0},
                {"text": "b", "logprob": -1.0},
                {"text": "c", "logprob": -2.0}
            ]})
            .to_string(),
        )
    });
    let client = stub.client();
    let props = client.propose("6 6 6 6", 3, &mut rng()).unwrap();
    let probs: Vec<f64> = props.iter().map(|p| p.raw_prob).collect();
    assert_eq!(probs, vec![(-1f64).exp(), (-1f64).exp(), (-2f64).exp()]);
    let log = stub.requests();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].0, "/v1/propose");
    assert_eq!(log[0].1, json!({"state": "6 6 6 6", "w": 3, "temperature": 1.0}));
}

#[test]
fn value_clamping_and_schema() {
    let stub = Stub::start(|_, body| {
        let payload = match body["state"].as_str().unwrap() {
            "fine" => json!({"value": 0.75}),
            "high" => json!({"value": 1.3}),
            "bad" => json!({"value": "yes"}),
            _ => json!({"error": "unknown state"}),
        };
        (200, payload.to_string())
    });
    let client = stub.client();
    assert_eq!(client.value("fine").unwrap(), 0.75);
    assert_eq!(client.value("high").unwrap(), 1.0);
    assert_eq!(client.clamped_values(), 1);
    assert!(matches!(client.value("bad"), Err(EvalError::Protocol { .. })));
    let err = client.value("other").unwrap_err();
    assert!(err.to_string().contains("unknown state"));
    assert_eq!(stub.requests().len(), 4);
}

#[test]
fn http_errors_are_not_retried() {
    let stub = Stub::start(|_, _| (500, json!({"error": "boom"}).to_string()));
    let client = stub.client();
    match client.value("x") {
        Err(EvalError::Status { status, excerpt }) => {
            assert_eq!(status, 500);
            assert!(excerpt.contains("boom"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(stub.requests().len(), 1);
}

#[test]
fn remote_search_matches_in_process_oracle() {
    let oracle = Arc::new(OracleEvaluator::new(Game24Oracle::default()));
    let served = oracle.clone();
    let stub = Stub::start(move |path, body| {
        let state = body["state"].as_str().unwrap();
        let payload = if path == "/v1/propose" {
            let w = body["w"].as_u64().unwrap() as usize;
            let props = served.propose(state, w, &mut rng()).unwrap();
            let actions: Vec<Value> = props
                .iter()
                .map(|p| json!({"text": p.action_text, "logprob": p.raw_prob.ln()}))
                .collect();
            json!({ "actions": actions })
        } else {
            json!({"value": served.value(state).unwrap()})
        };
        (200, payload.to_string())
    });
    let client = stub.client();
    let config = SearchConfig {
        num_simulations: 16,
        expansion_width: 12,
        ..SearchConfig::default()
    };
    for nums in [[6, 6, 6, 6], [1, 2, 4, 7], [3, 3, 8, 8]] {
        let local = decode_episode(&Game24, &*oracle, &config, Game24State::from_ints(&nums)).unwrap();
        let remote = decode_episode(&Game24, &client, &config, Game24State::from_ints(&nums)).unwrap();
        assert_eq!(local.actions, remote.actions, "{nums:?}");
        assert_eq!(local.reward, remote.reward);
        assert_eq!(local.cost, remote.cost);
    }
}
