use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::{clamp_unit, EvalError, Evaluator, Proposal};
use crate::env::game24::{self, Game24State};
use crate::env::SyntheticTreeMdp;

/// Exact knowledge about an environment: true values and prior logits over
/// every legal action.
pub trait Oracle: Send + Sync {
    fn exact_value(&self, state: &str) -> Result<f64, EvalError>;

    /// `(action_text, logit)` for every legal action of a non-terminal state.
    fn prior_logits(&self, state: &str) -> Result<Vec<(String, f64)>, EvalError>;
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn exact_value(&self, state: &str) -> Result<f64, EvalError> {
        (**self).exact_value(state)
    }

    fn prior_logits(&self, state: &str) -> Result<Vec<(String, f64)>, EvalError> {
        (**self).prior_logits(state)
    }
}

/// Standard normal draw that is a pure function of `(seed, key)`.
///
/// Box–Muller over two 64-bit words of `sha256("{seed}:{key}")`, so any
/// language with SHA-256 can reproduce it.
pub fn keyed_normal(seed: u64, key: &str) -> f64 {
    let digest = Sha256::digest(format!("{seed}:{key}").as_bytes());
    let word = |i: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[i * 8..i * 8 + 8]);
        u64::from_be_bytes(b)
    };
    // 53-bit uniforms in (0, 1)
    let u1 = ((word(0) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = ((word(1) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Game24 oracle: value is solvability; prior logits are
/// `beta · solvable(next) + prior_noise · keyed_normal(prior_seed, action)`.
#[derive(Debug)]
pub struct Game24Oracle {
    pub beta: f64,
    pub prior_noise: f64,
    pub prior_seed: u64,
    cache: Mutex<HashMap<String, bool>>,
}

impl Default for Game24Oracle {
    fn default() -> Self {
        Self::new(4.0, 0.5, 0)
    }
}

impl Game24Oracle {
    pub fn new(beta: f64, prior_noise: f64, prior_seed: u64) -> Self {
        Self {
            beta,
            prior_noise,
            prior_seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn solvable(&self, state: &Game24State) -> bool {
        let key = state.canonical_text();
        if let Some(&hit) = self.cache.lock().unwrap().get(&key) {
            return hit;
        }
        let result = game24::solvable(state.numbers());
        self.cache.lock().unwrap().insert(key, result);
        result
    }
}

impl Oracle for Game24Oracle {
    fn exact_value(&self, state: &str) -> Result<f64, EvalError> {
        let s = Game24State::parse(state)?;
        Ok(if self.solvable(&s) { 1.0 } else { 0.0 })
    }

    fn prior_logits(&self, state: &str) -> Result<Vec<(String, f64)>, EvalError> {
        let s = Game24State::parse(state)?;
        if s.is_terminal() {
            return Err(EvalError::TerminalState(state.to_string()));
        }
        Ok(s.legal_actions()
            .into_iter()
            .map(|(text, next)| {
                let v = if self.solvable(&next) { 1.0 } else { 0.0 };
                let logit = self.beta * v + self.prior_noise * keyed_normal(self.prior_seed, &text);
                (text, logit)
            })
            .collect())
    }
}

impl Oracle for SyntheticTreeMdp {
    fn exact_value(&self, state: &str) -> Result<f64, EvalError> {
        let s = self.parse_state(state)?;
        Ok(self.optimal_value(s.index))
    }

    fn prior_logits(&self, state: &str) -> Result<Vec<(String, f64)>, EvalError> {
        let s = self.parse_state(state)?;
        if s.depth == self.params().depth {
            return Err(EvalError::TerminalState(state.to_string()));
        }
        Ok(self
            .children(s.index)
            .enumerate()
            .map(|(k, child)| (k.to_string(), self.logit(child)))
            .collect())
    }
}

/// Exact evaluator. Proposals are `softmax(logit / temperature)` over all
/// legal actions, truncated to the `width` most probable.
#[derive(Debug, Clone)]
pub struct OracleEvaluator<O> {
    oracle: O,
    pub temperature: f64,
}

impl<O: Oracle> OracleEvaluator<O> {
    pub fn new(oracle: O) -> Self {
        Self {
            oracle,
            temperature: 1.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }
}

impl<O: Oracle> Evaluator for OracleEvaluator<O> {
    fn propose(&self, state: &str, width: usize, _rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        let logits = self.oracle.prior_logits(state)?;
        if logits.is_empty() {
            return Ok(Vec::new());
        }
        let scaled: Vec<f64> = logits.iter().map(|(_, l)| l / self.temperature).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut out: Vec<Proposal> = logits
            .into_iter()
            .zip(weights)
            .map(|((text, _), w)| Proposal::new(text, (w / total).max(f64::MIN_POSITIVE)))
            .collect();
        // stable: equal probabilities keep enumeration order
        out.sort_by(|a, b| b.raw_prob.total_cmp(&a.raw_prob));
        out.truncate(width);
        Ok(out)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        self.oracle.exact_value(state).map(clamp_unit)
    }
}

/// Oracle value plus a fixed per-state Gaussian error:
/// `clamp(V(s) + sigma · keyed_normal(seed, text(s)), 0, 1)`.
#[derive(Debug, Clone)]
pub struct NoisyEvaluator<O> {
    inner: OracleEvaluator<O>,
    pub sigma: f64,
    pub seed: u64,
}

impl<O: Oracle> NoisyEvaluator<O> {
    pub fn new(inner: OracleEvaluator<O>, sigma: f64, seed: u64) -> Self {
        assert!(sigma >= 0.0, "noise sigma must be non-negative");
        Self { inner, sigma, seed }
    }

    /// Value before clamping; exposed for error analysis.
    pub fn unclamped_value(&self, state: &str) -> Result<f64, EvalError> {
        let exact = self.inner.oracle().exact_value(state)?;
        if self.sigma == 0.0 {
            return Ok(exact);
        }
        Ok(exact + self.sigma * keyed_normal(self.seed, state))
    }

    pub fn oracle(&self) -> &O {
        self.inner.oracle()
    }
}

impl<O: Oracle> Evaluator for NoisyEvaluator<O> {
    fn propose(&self, state: &str, width: usize, rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        self.inner.propose(state, width, rng)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        self.unclamped_value(state).map(clamp_unit)
    }
}
