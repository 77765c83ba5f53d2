//! Tree search for sequential decision processes with sentence-level actions.
//!
//! Two search algorithms share one tree and one backup path:
//!
//! * [`Algorithm::Rescale`]: Gumbel top-m sampling and Sequential Halving at
//!   the root, improved-policy selection with completed values below it, and a
//!   deterministic final decision.
//! * [`Algorithm::AlphaZero`]: Dirichlet root noise, PUCT everywhere, and a
//!   final action sampled from exponentiated visit counts.
//!
//! Environments implement [`env::Environment`]; policy/value backends implement
//! [`evaluators::Evaluator`].

pub mod config;
pub mod env;
pub mod evaluators;
pub mod gumbel;
pub mod puct;
pub mod rng;
pub mod search;

pub use config::{Algorithm, ConfigError, PuctParams, SearchConfig, UnvisitedQ};
pub use env::Environment;
pub use evaluators::{EvalError, Evaluator, Proposal};
pub use search::{
    decode_episode, run_search, CostCounter, RootChildStats, SearchError, SearchResult, SearchTree, Trajectory,
};
