//! Environment contract and the built-in environments.

pub mod game24;
pub mod synthetic;

use thiserror::Error;

pub use game24::{Game24, Game24State};
pub use synthetic::{SyntheticParams, SyntheticState, SyntheticTreeMdp};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnvError {
    #[error("unknown action {action:?} in state {state:?}")]
    UnknownAction { state: String, action: String },
    #[error("cannot parse state {0:?}")]
    BadState(String),
    #[error("state {0:?} is not terminal")]
    NotTerminal(String),
    #[error("state {0:?} is terminal")]
    Terminal(String),
    #[error("bad problem line {line}: {reason}")]
    BadProblem { line: usize, reason: String },
}

/// A deterministic sequential decision process over text-addressable states.
pub trait Environment: Send + Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    /// Injective serialization of a state; this is what evaluators see.
    fn canonical_text(&self, state: &Self::State) -> String;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Reward of ending the episode in `state`. Only terminal states (and dead
    /// ends) are ever scored with it.
    fn reward(&self, state: &Self::State) -> f64;

    /// Deterministic transition `s ⊕ a`.
    fn step(&self, state: &Self::State, action: &str) -> Result<Self::State, EnvError>;

    /// Whether committing `action` ends the episode regardless of the state.
    fn is_stop_action(&self, _action: &str) -> bool {
        false
    }
}
