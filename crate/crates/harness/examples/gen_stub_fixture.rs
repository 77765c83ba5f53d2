//! Regenerates `fixtures/stub_conformance.jsonl` from the in-process Game24
//! oracle with default parameters.
//!
//! Usage: `cargo run -p rescale-harness --example gen_stub_fixture > fixtures/stub_conformance.jsonl`

use rescale_core::evaluators::{Game24Oracle, OracleEvaluator};
use rescale_core::Evaluator;
use serde_json::json;

fn main() {
    let ev = OracleEvaluator::new(Game24Oracle::default());
    let mut rng = rescale_core::rng::stream(0, &[]);
    for state in ["6 6 6 6", "1 1 1 1", "4 6", "3 8"] {
        let v = ev.value(state).expect("valid state");
        let line = json!({"path": "/v1/value", "request": {"state": state}, "response": {"value": v}});
        println!("{line}");
    }
    for (state, w) in [("6 6 6 6", 3), ("4 6", 2), ("1 2 3", 12)] {
        let props = ev.propose(state, w, &mut rng).expect("valid state");
        let actions: Vec<_> = props
            .iter()
            .map(|p| json!({"text": p.action_text, "logprob": p.raw_prob.ln()}))
            .collect();
        let line = json!({
            "path": "/v1/propose",
            "request": {"state": state, "w": w, "temperature": 1.0},
            "response": {"actions": actions},
        });
        println!("{line}");
    }
    let line = json!({"path": "/v1/value", "request": {"state": "not a state"}, "response": {"error": "cannot parse state \"not a state\""}});
    println!("{line}");
}
