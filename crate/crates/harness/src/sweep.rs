//! Sweep execution and the CSV record format.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::jobs::{JobRunner, ProblemSet};
use crate::spec::{GridPoint, Method, SweepSpec};
use crate::HarnessError;

/// One CSV row. Column order is the field order and is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: String,
    pub budget_label: String,
    #[serde(rename = "N")]
    pub n: u32,
    pub w: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    pub problem_id: usize,
    /// 0 or 1.
    pub correct: u8,
    pub sims: u64,
    pub nodes_expanded: u64,
    pub propose_calls: u64,
    pub value_calls: u64,
    pub action_chars: u64,
    pub wall_ms: u64,
    /// Empty when the first decision never happened (failed runs).
    pub max_root_visit_fraction: Option<f64>,
    /// Empty on success.
    pub error: Option<String>,
}

pub const CSV_COLUMNS: [&str; 17] = [
    "method",
    "budget_label",
    "N",
    "w",
    "M",
    "d",
    "seed",
    "problem_id",
    "correct",
    "sims",
    "nodes_expanded",
    "propose_calls",
    "value_calls",
    "action_chars",
    "wall_ms",
    "max_root_visit_fraction",
    "error",
];

#[derive(Debug, Clone, Copy)]
struct Job<'a> {
    method: Method,
    grid: &'a GridPoint,
    problem_id: usize,
    seed: u64,
}

/// Runs every `(method, grid point, problem, seed)` job and returns the
/// records in that nesting order. Failed runs become rows with `error` set.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>, HarnessError> {
    spec.validate()?;
    let problems = ProblemSet::from_spec(spec)?;
    run_sweep_on(spec, &problems)
}

pub fn run_sweep_on(spec: &SweepSpec, problems: &ProblemSet) -> Result<Vec<SweepRecord>, HarnessError> {
    let runner = JobRunner::new(spec, problems);
    let mut jobs = Vec::new();
    for &method in &spec.methods {
        for grid in &spec.grid {
            for problem_id in 0..problems.len() {
                for &seed in &spec.seeds {
                    jobs.push(Job {
                        method,
                        grid,
                        problem_id,
                        seed,
                    });
                }
            }
        }
    }
    info!(jobs = jobs.len(), workers = spec.workers, "starting sweep");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| HarnessError::Spec(format!("cannot start worker pool: {e}")))?;
    let records = pool.install(|| jobs.par_iter().map(|job| run_job(&runner, job)).collect());
    Ok(records)
}

fn run_job(runner: &JobRunner<'_>, job: &Job<'_>) -> SweepRecord {
    let g = job.grid;
    let start = Instant::now();
    let outcome = runner.run(job.method, g, job.problem_id, job.seed);
    let wall_ms = start.elapsed().as_millis() as u64;
    let mut record = SweepRecord {
        method: job.method.to_string(),
        budget_label: g.label.clone(),
        n: g.sims,
        w: g.width,
        m: g.top_m,
        d: g.depth,
        seed: job.seed,
        problem_id: job.problem_id,
        correct: 0,
        sims: 0,
        nodes_expanded: 0,
        propose_calls: 0,
        value_calls: 0,
        action_chars: 0,
        wall_ms,
        max_root_visit_fraction: None,
        error: None,
    };
    match outcome {
        Ok(o) => {
            record.correct = u8::from(o.correct);
            record.sims = o.sims;
            record.nodes_expanded = o.nodes_expanded;
            record.propose_calls = o.cost.propose_calls;
            record.value_calls = o.cost.value_calls;
            record.action_chars = o.cost.action_chars;
            record.max_root_visit_fraction = o.max_root_visit_fraction;
        }
        Err(e) => {
            warn!(method = %job.method, budget = %g.label, problem = job.problem_id, seed = job.seed, error = %e, "run failed");
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Serializes records with a header row.
pub fn to_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV through a temporary file in the target directory and
/// renames it into place.
pub fn write_csv(records: &[SweepRecord], path: &Path) -> Result<(), HarnessError> {
    let io_err = |source: std::io::Error| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    to_csv(records, &mut tmp).map_err(|e| io_err(std::io::Error::other(e)))?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
