use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rescale_core::evaluators::{RemoteConfig, RemoteEvaluator};
use rescale_harness::jobs::{JobRunner, ProblemSet};
use rescale_harness::spec::{default_grid, preset, EnvKind, EvaluatorSpec, Method, Scope, SweepSpec};
use rescale_harness::{inspect, report, stub_check, sweep};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "rescale", version, about = "Tree-search benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem and print the trajectory and the first search tree.
    Run {
        #[command(flatten)]
        opts: SpecOpts,
        /// Problem index.
        #[arg(long, default_value_t = 0)]
        problem: usize,
    },
    /// Run every (method, budget, problem, seed) combination and write a CSV.
    Sweep {
        #[command(flatten)]
        opts: SpecOpts,
    },
    /// Aggregate a sweep CSV into a per-cell table.
    Report {
        csv: PathBuf,
        /// Also write tab-separated plot data here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Check a remote evaluator server against the wire protocol.
    StubCheck {
        #[arg(long, env = "RESCALE_ENDPOINT")]
        endpoint: String,
        /// JSON-lines request/response fixture to replay.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Check exact Game24 answers (the server must evaluate Game24).
        #[arg(long)]
        game24: bool,
    },
}

/// Sweep specification sources. Flags override keys of the config file.
#[derive(Args)]
struct SpecOpts {
    /// TOML sweep specification.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Methods, comma separated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Budget presets (small, medium, large, ablation), comma separated.
    #[arg(long, value_delimiter = ',')]
    budget: Vec<String>,
    #[arg(long)]
    sims: Option<u32>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// game24 or synthetic.
    #[arg(long)]
    env: Option<String>,
    /// oracle, noisy:SIGMA, remote:URL, or remote (uses RESCALE_ENDPOINT).
    #[arg(long)]
    evaluator: Option<String>,
    /// episode or root-decision.
    #[arg(long)]
    scope: Option<String>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Number of problems.
    #[arg(long)]
    problems: Option<usize>,
    /// Game24 problem file.
    #[arg(long)]
    problem_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_gumbel: bool,
    #[arg(long)]
    no_halving: bool,
}

impl SpecOpts {
    fn build(&self) -> Result<SweepSpec> {
        let mut spec = match &self.config {
            Some(p) => SweepSpec::load(p)?,
            None => SweepSpec::default(),
        };
        if let Some(env) = &self.env {
            spec.env = env.parse::<EnvKind>()?;
            if self.config.is_none() {
                spec.grid = default_grid(spec.env);
            }
        }
        if !self.budget.is_empty() {
            spec.grid = self
                .budget
                .iter()
                .map(|b| preset(spec.env, &b.to_lowercase()))
                .collect::<Result<_, _>>()?;
        }
        for g in &mut spec.grid {
            g.sims = self.sims.unwrap_or(g.sims);
            g.width = self.width.unwrap_or(g.width);
            g.top_m = self.top_m.unwrap_or(g.top_m);
            g.depth = self.depth.unwrap_or(g.depth);
        }
        if !self.method.is_empty() {
            spec.methods = self
                .method
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<_, _>>()?;
        }
        if self.no_gumbel {
            spec.methods = spec.methods.iter().map(|m| m.without_gumbel()).collect();
        }
        if self.no_halving {
            spec.methods = spec.methods.iter().map(|m| m.without_halving()).collect();
        }
        if let Some(e) = &self.evaluator {
            spec.evaluator = if e == "remote" {
                let url = std::env::var("RESCALE_ENDPOINT")
                    .context("--evaluator remote needs RESCALE_ENDPOINT or remote:URL")?;
                EvaluatorSpec::Remote { url }
            } else {
                e.parse()?
            };
        }
        if let Some(s) = &self.scope {
            spec.scope = s.parse::<Scope>()?;
        }
        if !self.seeds.is_empty() {
            spec.seeds = self.seeds.clone();
        }
        if self.problems.is_some() {
            spec.problems = self.problems;
        }
        if let Some(p) = &self.problem_file {
            spec.game24.problems = p.clone();
        }
        if let Some(o) = &self.out {
            spec.out = o.clone();
        }
        if let Some(w) = self.workers {
            spec.workers = w;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn print_checks(results: &[stub_check::CheckResult]) -> bool {
    for r in results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    results.iter().all(|r| r.passed)
}

fn main() -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { opts, problem } => {
            let spec = opts.build()?;
            let problems = ProblemSet::from_spec(&spec)?;
            let runner = JobRunner::new(&spec, &problems);
            let text = inspect::explain(&runner, spec.methods[0], &spec.grid[0], problem, spec.seeds[0])?;
            print!("{text}");
        }
        Command::Sweep { opts } => {
            let spec = opts.build()?;
            let records = sweep::run_sweep(&spec)?;
            sweep::write_csv(&records, &spec.out)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            print!("{}", report::render_table(&report::aggregate(&records)));
            println!("wrote {} rows to {}", records.len(), spec.out.display());
            if failed > 0 {
                eprintln!("{failed} runs failed; see the error column");
            }
        }
        Command::Report { csv, plot_data } => {
            let records = report::read_records(&csv)?;
            if records.is_empty() {
                bail!("{} has no rows", csv.display());
            }
            let rows = report::aggregate(&records);
            print!("{}", report::render_table(&rows));
            if let Some(p) = plot_data {
                std::fs::write(&p, report::plot_data(&rows)).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::StubCheck {
            endpoint,
            fixture,
            game24,
        } => {
            if fixture.is_none() && !game24 {
                bail!("nothing to check: pass --fixture and/or --game24");
            }
            let client = RemoteEvaluator::new(RemoteConfig::new(endpoint));
            let mut ok = true;
            if let Some(f) = fixture {
                let entries = stub_check::load_fixture(&f)?;
                ok &= print_checks(&stub_check::check_fixture(&client, &entries));
            }
            if game24 {
                ok &= print_checks(&stub_check::check_game24(&client));
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
