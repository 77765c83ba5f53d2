//! Policy/value backends behind one contract.
//!
//! An [`Evaluator`] proposes candidate actions with (unnormalized)
//! probabilities and scores states with a value in `[0, 1]`. Evaluators only
//! ever see canonical state text, which keeps in-process and remote backends
//! interchangeable.

mod oracle;
pub mod remote;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;

pub use oracle::{keyed_normal, Game24Oracle, NoisyEvaluator, Oracle, OracleEvaluator};
pub use remote::{RemoteConfig, RemoteEvaluator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub action_text: String,
    /// Positive, not necessarily normalized.
    pub raw_prob: f64,
}

impl Proposal {
    pub fn new(action_text: impl Into<String>, raw_prob: f64) -> Self {
        Self {
            action_text: action_text.into(),
            raw_prob,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("cannot propose actions for terminal state {0:?}")]
    TerminalState(String),
    #[error("protocol error: {message} (payload: {excerpt})")]
    Protocol { message: String, excerpt: String },
    #[error("server returned status {status}: {excerpt}")]
    Status { status: u16, excerpt: String },
    #[error("request to {url} failed after {attempts} attempts: {message}")]
    Network {
        url: String,
        attempts: u32,
        message: String,
    },
}

pub trait Evaluator: Send + Sync {
    /// Up to `width` candidate actions for `state`. Must return at least one
    /// proposal for a non-terminal state.
    fn propose(&self, state: &str, width: usize, rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError>;

    /// Estimated value of `state` in `[0, 1]`.
    fn value(&self, state: &str) -> Result<f64, EvalError>;
}

impl<T: Evaluator + ?Sized> Evaluator for &T {
    fn propose(&self, state: &str, width: usize, rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        (**self).propose(state, width, rng)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        (**self).value(state)
    }
}

impl<T: Evaluator + ?Sized> Evaluator for Box<T> {
    fn propose(&self, state: &str, width: usize, rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        (**self).propose(state, width, rng)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        (**self).value(state)
    }
}

impl<T: Evaluator + ?Sized> Evaluator for Arc<T> {
    fn propose(&self, state: &str, width: usize, rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        (**self).propose(state, width, rng)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        (**self).value(state)
    }
}

/// Counts contract invocations of the wrapped evaluator.
#[derive(Debug, Default)]
pub struct CountingEvaluator<E> {
    inner: E,
    propose_calls: AtomicU64,
    value_calls: AtomicU64,
}

impl<E> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            propose_calls: AtomicU64::new(0),
            value_calls: AtomicU64::new(0),
        }
    }

    pub fn propose_calls(&self) -> u64 {
        self.propose_calls.load(Ordering::Relaxed)
    }

    pub fn value_calls(&self) -> u64 {
        self.value_calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Evaluator> Evaluator for CountingEvaluator<E> {
    fn propose(&self, state: &str, width: usize, rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        self.propose_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.propose(state, width, rng)
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        self.value_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(state)
    }
}

/// Clamps a value into `[0, 1]`; NaN maps to 0.
pub fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}
