mod common;

use std::collections::BTreeMap;
use std::process::Command;

use common::fixtures;
use rescale_core::env::game24::{load_problems, Game24State};
use rescale_core::env::Game24;
use rescale_core::evaluators::{Game24Oracle, OracleEvaluator};
use rescale_harness::report::aggregate;
use rescale_harness::spec::{default_grid, EnvKind, EvaluatorSpec, Method, Scope, SweepSpec};
use rescale_harness::sweep::{run_sweep, to_csv, SweepRecord};
use rescale_harness::{best_of_n, jobs::ProblemSet};

fn spec(problems: usize, seeds: &[u64]) -> SweepSpec {
    SweepSpec {
        methods: vec![Method::RESCALE, Method::AlphaZero],
        seeds: seeds.to_vec(),
        evaluator: EvaluatorSpec::Noisy { sigma: 0.2 },
        problems: Some(problems),
        ..SweepSpec::default()
    }
}

fn csv_without_wall(records: &[SweepRecord]) -> String {
    let zeroed: Vec<SweepRecord> = records
        .iter()
        .cloned()
        .map(|r| SweepRecord { wall_ms: 0, ..r })
        .collect();
    let mut buf = Vec::new();
    to_csv(&zeroed, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn cardinality_and_row_order() {
    let records = run_sweep(&spec(100, &[0, 1, 2])).unwrap();
    assert_eq!(records.len(), 2 * 3 * 3 * 100);
    assert!(records.iter().all(|r| r.error.is_none()));
    // method, then grid point, then problem, then seed
    let keys: Vec<(String, u32, usize, u64)> = records
        .iter()
        .map(|r| (r.method.clone(), r.n, r.problem_id, r.seed))
        .collect();
    assert_eq!(keys[0], ("rescale".into(), 8, 0, 0));
    assert_eq!(keys[1], ("rescale".into(), 8, 0, 1));
    assert_eq!(keys[3], ("rescale".into(), 8, 1, 0));
    assert_eq!(keys[300], ("rescale".into(), 24, 0, 0));
    assert_eq!(keys[900], ("alphazero".into(), 8, 0, 0));
    for r in &records {
        assert!(r.correct <= 1);
        let f = r.max_root_visit_fraction.unwrap();
        assert!(f > 0.0 && f <= 1.0);
    }
}

#[test]
fn identical_specs_give_identical_csv_for_any_worker_count() {
    let a = run_sweep(&spec(20, &[0, 1])).unwrap();
    let b = run_sweep(&spec(20, &[0, 1])).unwrap();
    let c = run_sweep(&SweepSpec {
        workers: 3,
        ..spec(20, &[0, 1])
    })
    .unwrap();
    assert_eq!(csv_without_wall(&a), csv_without_wall(&b));
    assert_eq!(csv_without_wall(&a), csv_without_wall(&c));
}

#[test]
fn problems_and_seeds_are_isolated() {
    let key = |r: &SweepRecord| (r.method.clone(), r.budget_label.clone(), r.problem_id, r.seed);
    let index = |rs: Vec<SweepRecord>| -> BTreeMap<_, SweepRecord> {
        rs.into_iter()
            .map(|r| (key(&r), SweepRecord { wall_ms: 0, ..r }))
            .collect()
    };
    let small = index(run_sweep(&spec(5, &[3])).unwrap());
    let large = index(run_sweep(&spec(12, &[7, 3])).unwrap());
    for (k, r) in &small {
        assert_eq!(Some(r), large.get(k), "{k:?}");
    }
}

#[test]
fn aggregates_match_raw_recomputation() {
    let records = run_sweep(&spec(30, &[0, 1, 2])).unwrap();
    let rows = aggregate(&records);
    assert_eq!(rows.len(), 6);
    for row in rows {
        let cell: Vec<&SweepRecord> = records
            .iter()
            .filter(|r| r.method == row.method && r.budget_label == row.budget_label)
            .collect();
        let mut accs = Vec::new();
        for seed in [0u64, 1, 2] {
            let s: Vec<f64> = cell
                .iter()
                .filter(|r| r.seed == seed)
                .map(|r| r.correct as f64)
                .collect();
            accs.push(s.iter().sum::<f64>() / s.len() as f64);
        }
        let mean = accs.iter().sum::<f64>() / 3.0;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 2.0;
        assert!((row.accuracy_mean - mean).abs() < 1e-12);
        assert!((row.accuracy_std - var.sqrt()).abs() < 1e-12);
        let frac = cell.iter().map(|r| r.max_root_visit_fraction.unwrap()).sum::<f64>() / cell.len() as f64;
        assert!((row.visit_fraction_mean.unwrap() - frac).abs() < 1e-12);
        let calls = cell.iter().map(|r| r.value_calls as f64).sum::<f64>() / cell.len() as f64;
        assert!((row.value_calls_mean - calls).abs() < 1e-12);
    }
}

#[test]
fn unreachable_server_yields_error_rows() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let s = SweepSpec {
        methods: vec![Method::RESCALE],
        grid: vec![default_grid(EnvKind::Synthetic)[0].clone()],
        seeds: vec![0],
        evaluator: EvaluatorSpec::Remote {
            url: format!("http://127.0.0.1:{port}"),
        },
        problems: Some(2),
        ..SweepSpec::default()
    };
    let records = run_sweep(&s).unwrap();
    assert_eq!(records.len(), 2);
    for r in records {
        assert_eq!(r.correct, 0);
        assert!(r.error.unwrap().contains("failed after"));
        assert_eq!(r.max_root_visit_fraction, None);
    }
}

#[test]
fn best_of_n_with_exact_scores_is_any_of_n() {
    let ev = OracleEvaluator::new(Game24Oracle::default());
    let problems = load_problems(&fixtures().join("game24_100.txt")).unwrap();
    for (i, p) in problems.iter().enumerate().take(25) {
        let b = best_of_n(&Game24, &ev, Game24State::from_ints(p), 32, 12, 4, i as u64).unwrap();
        let any = b.scores.contains(&1.0);
        let reward = rescale_core::Environment::reward(&Game24, &b.final_state);
        assert_eq!(reward == 1.0, any, "{p:?}");
    }
}

#[test]
fn game24_episode_sweep_uses_fixture_file() {
    let s = SweepSpec {
        methods: vec![Method::RESCALE, Method::BestOfN],
        grid: vec![default_grid(EnvKind::Game24)[0].clone()],
        seeds: vec![0],
        env: EnvKind::Game24,
        scope: Scope::Episode,
        problems: Some(10),
        game24: rescale_harness::spec::Game24Options {
            problems: fixtures().join("game24_100.txt"),
            ..Default::default()
        },
        ..SweepSpec::default()
    };
    assert_eq!(ProblemSet::from_spec(&s).unwrap().len(), 10);
    let records = run_sweep(&s).unwrap();
    assert_eq!(records.len(), 20);
    assert!(records.iter().all(|r| r.error.is_none()));
    let bon = records.iter().find(|r| r.method == "best-of-n").unwrap();
    assert_eq!(bon.value_calls, 8);
}

#[test]
fn bundled_configs_parse() {
    for name in ["synthetic_scaling.toml", "game24.toml"] {
        let path = fixtures().join("../configs").join(name);
        SweepSpec::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn cli_sweep_with_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("spec.toml");
    let out = dir.path().join("out.csv");
    let spec = SweepSpec {
        problems: Some(4),
        seeds: vec![0, 1],
        ..SweepSpec::default()
    };
    std::fs::write(&config, spec.to_toml()).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_rescale"))
        .args(["sweep", "--config"])
        .arg(&config)
        .args([
            "--method",
            "rescale",
            "--no-halving",
            "--budget",
            "small,large",
            "--scope",
            "root-decision",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 4 * 2);
    assert!(lines[1].starts_with("rescale-no-halving,small,8,8,8,4,0,0,"));
    assert!(lines.last().unwrap().starts_with("rescale-no-halving,large,64,"));
}

#[test]
fn cli_run_prints_trajectory_and_tree() {
    let out = Command::new(env!("CARGO_BIN_EXE_rescale"))
        .args([
            "run",
            "--env",
            "game24",
            "--budget",
            "medium",
            "--problem",
            "3",
            "--problem-file",
        ])
        .arg(fixtures().join("game24_100.txt"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("step 0:"));
    assert!(text.contains("reward:"));
    assert!(text.contains("tree dump of the first search"));
    assert!(text.lines().any(|l| l.starts_with("0\t-\t")));
}
