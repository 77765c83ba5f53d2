//! Benchmark harness: budget sweeps over search methods, CSV records,
//! aggregate reports and remote-protocol conformance checks.

pub mod inspect;
pub mod jobs;
pub mod report;
pub mod spec;
pub mod stub_check;
pub mod sweep;

use std::path::PathBuf;

use rescale_core::env::EnvError;
use rescale_core::{EvalError, SearchError};
use thiserror::Error;

pub use jobs::{best_of_n, BestOfN, Outcome, ProblemSet};
pub use report::{aggregate, read_records, ReportRow};
pub use spec::{EnvKind, EvaluatorSpec, GridPoint, Method, Scope, SweepSpec};
pub use sweep::{run_sweep, write_csv, SweepRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error("{path}: row {row}: {message}")]
    Csv { path: PathBuf, row: u64, message: String },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("conformance check failed: {0}")]
    Conformance(String),
}
