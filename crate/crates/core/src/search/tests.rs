use std::collections::HashMap;

use approx::assert_abs_diff_eq;
use rand::RngCore;

use super::*;
use crate::env::{Game24, Game24State, SyntheticParams, SyntheticTreeMdp};
use crate::evaluators::{CountingEvaluator, Game24Oracle, OracleEvaluator, Proposal};

/// States are `/`-joined action paths; terminal at `terminal_depth`.
struct PathEnv {
    terminal_depth: usize,
}

#[derive(Debug, Clone)]
struct PathState(Vec<String>);

impl Environment for PathEnv {
    type State = PathState;

    fn canonical_text(&self, s: &PathState) -> String {
        std::iter::once("root".to_string())
            .chain(s.0.iter().cloned())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn is_terminal(&self, s: &PathState) -> bool {
        s.0.len() >= self.terminal_depth
    }

    fn reward(&self, s: &PathState) -> f64 {
        if s.0.last().is_some_and(|a| a == "win") {
            1.0
        } else {
            0.0
        }
    }

    fn step(&self, s: &PathState, a: &str) -> Result<PathState, EnvError> {
        let mut next = s.0.clone();
        next.push(a.to_string());
        Ok(PathState(next))
    }
}

/// Same proposals at every state; values looked up by state text.
struct Scripted {
    proposals: Vec<(&'static str, f64)>,
    values: HashMap<String, f64>,
    default_value: f64,
}

impl Scripted {
    fn new(proposals: Vec<(&'static str, f64)>) -> Self {
        Self {
            proposals,
            values: HashMap::new(),
            default_value: 0.5,
        }
    }
}

impl Evaluator for Scripted {
    fn propose(&self, _state: &str, _w: usize, _rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
        Ok(self.proposals.iter().map(|(t, p)| Proposal::new(*t, *p)).collect())
    }

    fn value(&self, state: &str) -> Result<f64, EvalError> {
        Ok(*self.values.get(state).unwrap_or(&self.default_value))
    }
}

fn cfg(n: u32, w: usize, m: usize, d: usize) -> SearchConfig {
    SearchConfig {
        num_simulations: n,
        expansion_width: w,
        root_top_m: m,
        max_depth: d,
        ..SearchConfig::default()
    }
}

fn synthetic(b: usize, depth: usize, seed: u64) -> SyntheticTreeMdp {
    SyntheticTreeMdp::generate(SyntheticParams {
        branching: b,
        depth,
        seed,
        ..SyntheticParams::default()
    })
    .unwrap()
}

#[test]
fn new_tree_expands_root() {
    let mdp = synthetic(3, 2, 1);
    let ev = OracleEvaluator::new(mdp.clone());
    let config = cfg(4, 3, 3, 2);
    let s = Searcher::new(&mdp, &ev, &config).unwrap();
    let tree = s.new_tree(mdp.root(), 0).unwrap();
    assert_eq!(tree.len(), 4);
    let priors: f64 = tree.node(tree.root()).children.iter().map(|e| e.prior).sum();
    assert_abs_diff_eq!(priors, 1.0, epsilon = 1e-9);
}

#[test]
fn game24_root_children_are_legal_moves() {
    let env = Game24;
    let ev = OracleEvaluator::new(Game24Oracle::default());
    let config = cfg(16, 12, 8, 4);
    let root = Game24State::from_ints(&[6, 6, 6, 6]);
    let legal: Vec<String> = root.legal_actions().into_iter().map(|(t, _)| t).collect();
    let tree = Searcher::new(&env, &ev, &config).unwrap().new_tree(root, 0).unwrap();
    let children = &tree.node(tree.root()).children;
    assert!(!children.is_empty() && children.len() <= 12);
    assert!(children.iter().all(|e| legal.contains(&e.action)));
}

#[test]
fn width_beyond_legal_actions_keeps_all() {
    let mdp = synthetic(3, 2, 2);
    let ev = OracleEvaluator::new(mdp.clone());
    let config = cfg(4, 8, 3, 2);
    let tree = Searcher::new(&mdp, &ev, &config)
        .unwrap()
        .new_tree(mdp.root(), 0)
        .unwrap();
    let children = &tree.node(tree.root()).children;
    assert_eq!(children.len(), 3);
    assert_abs_diff_eq!(children.iter().map(|e| e.prior).sum::<f64>(), 1.0, epsilon = 1e-9);
}

#[test]
fn priors_are_renormalized() {
    let env = PathEnv { terminal_depth: 3 };
    let ev = Scripted::new(vec![("a", 0.2), ("b", 0.2), ("c", 0.1), ("d", 0.1)]);
    let config = cfg(4, 4, 4, 3);
    let tree = Searcher::new(&env, &ev, &config)
        .unwrap()
        .new_tree(PathState(vec![]), 0)
        .unwrap();
    let p: Vec<f64> = tree.node(tree.root()).children.iter().map(|e| e.prior).collect();
    for (got, want) in p.iter().zip([1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
}

#[test]
fn duplicate_proposals_merge() {
    let env = PathEnv { terminal_depth: 3 };
    let ev = Scripted::new(vec![("a", 0.3), ("b", 0.6), ("a", 0.1)]);
    let config = cfg(2, 3, 2, 3);
    let tree = Searcher::new(&env, &ev, &config)
        .unwrap()
        .new_tree(PathState(vec![]), 0)
        .unwrap();
    let children = &tree.node(tree.root()).children;
    assert_eq!(children.len(), 2);
    assert_eq!(children[0].action, "a");
    assert_abs_diff_eq!(children[0].prior, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(children[1].prior, 0.6, epsilon = 1e-12);
    // every proposed text counts toward the cost, duplicates included
    assert_eq!(tree.cost().action_chars, 3);
}

#[test]
fn terminal_child_takes_reward() {
    let env = Game24;
    let ev = OracleEvaluator::new(Game24Oracle::default());
    let config = cfg(4, 12, 4, 4);
    let tree = Searcher::new(&env, &ev, &config)
        .unwrap()
        .new_tree(Game24State::from_ints(&[4, 6]), 0)
        .unwrap();
    let win = tree
        .node(tree.root())
        .children
        .iter()
        .find(|e| e.action == "4 * 6 = 24 (left: 24)")
        .unwrap();
    let child = tree.node(win.child);
    assert!(child.is_terminal);
    assert_eq!(child.value_eval, Some(1.0));
    // terminal children skip the value call
    assert_eq!(tree.cost().value_calls, 0);
}

#[test]
fn terminal_root_child_gives_length_one_path() {
    let env = PathEnv { terminal_depth: 1 };
    let ev = Scripted::new(vec![("win", 1.0)]);
    let config = cfg(1, 1, 1, 3);
    let s = Searcher::new(&env, &ev, &config).unwrap().with_backup_log();
    let mut tree = s.new_tree(PathState(vec![]), 0).unwrap();
    let v = s.run_simulation(&mut tree, 0, 0).unwrap();
    assert_eq!(v, 1.0);
    assert_eq!(tree.backup_log().unwrap().len(), 1);
}

#[test]
fn depth_capped_child_is_not_expanded() {
    let env = PathEnv { terminal_depth: 5 };
    let mut ev = Scripted::new(vec![("a", 1.0)]);
    ev.values.insert("root/a".into(), 0.3);
    let config = cfg(3, 1, 1, 1);
    let ev = CountingEvaluator::new(ev);
    let s = Searcher::new(&env, &ev, &config).unwrap();
    let (result, tree) = s.search(PathState(vec![]), 0).unwrap();
    assert_eq!(tree.len(), 2);
    assert_eq!(ev.propose_calls(), 1);
    assert_eq!(result.root_child_stats[0].mean_value, 0.3);
    assert!(tree.nodes().all(|(_, n)| n.depth <= 1));
}

#[test]
fn dead_end_becomes_terminal() {
    struct EmptyBelowRoot;
    impl Evaluator for EmptyBelowRoot {
        fn propose(&self, state: &str, _w: usize, _rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
            Ok(if state == "root" {
                vec![Proposal::new("win", 1.0)]
            } else {
                vec![]
            })
        }
        fn value(&self, _state: &str) -> Result<f64, EvalError> {
            Ok(0.2)
        }
    }
    let env = PathEnv { terminal_depth: 5 };
    let config = cfg(2, 2, 1, 4);
    let s = Searcher::new(&env, &EmptyBelowRoot, &config).unwrap();
    let (result, tree) = s.search(PathState(vec![]), 0).unwrap();
    let child = tree.node(tree.node(tree.root()).children[0].child);
    assert!(child.is_terminal);
    assert_eq!(child.value_eval, Some(1.0));
    assert_eq!(result.root_child_stats[0].mean_value, 1.0);
}

#[test]
fn evaluator_failure_aborts_with_sim_count() {
    struct FailsDeep;
    impl Evaluator for FailsDeep {
        fn propose(&self, state: &str, _w: usize, _rng: &mut dyn RngCore) -> Result<Vec<Proposal>, EvalError> {
            if state == "root" {
                Ok(vec![Proposal::new("a", 1.0)])
            } else {
                Err(EvalError::TerminalState(state.into()))
            }
        }
        fn value(&self, _state: &str) -> Result<f64, EvalError> {
            Ok(0.5)
        }
    }
    let env = PathEnv { terminal_depth: 5 };
    let config = cfg(2, 1, 1, 4);
    let err = Searcher::new(&env, &FailsDeep, &config)
        .unwrap()
        .search(PathState(vec![]), 0)
        .unwrap_err();
    assert!(matches!(
        err,
        SearchError::Eval {
            simulations_completed: 0,
            ..
        }
    ));
}

#[test]
fn halving_visit_pattern_n24_m8() {
    let mdp = synthetic(8, 3, 11);
    let ev = OracleEvaluator::new(mdp.clone());
    let config = cfg(24, 8, 8, 3);
    let r = run_search(&mdp, &ev, &config, mdp.root()).unwrap();
    let mut visits: Vec<u32> = r.root_child_stats.iter().map(|c| c.visit_count).collect();
    visits.sort_unstable();
    assert_eq!(visits, vec![1, 1, 1, 1, 3, 3, 7, 7]);
    assert_eq!(r.simulations_run, 24);
    for c in &r.root_child_stats {
        let expected = match c.eliminated_in_round {
            Some(0) => 1,
            Some(1) => 3,
            _ => 7,
        };
        assert_eq!(c.visit_count, expected, "{c:?}");
    }
    let chosen = &r.root_child_stats[r.chosen_index];
    assert_eq!(chosen.eliminated_in_round, None);
}

#[test]
fn single_candidate_gets_whole_budget() {
    let mdp = synthetic(4, 3, 3);
    let ev = OracleEvaluator::new(mdp.clone());
    let config = cfg(10, 4, 1, 3);
    let r = run_search(&mdp, &ev, &config, mdp.root()).unwrap();
    assert_eq!(r.root_child_stats[r.chosen_index].visit_count, 10);
    assert_eq!(r.effective_top_m, 1);
}

#[test]
fn small_budget_shrinks_candidate_set() {
    let mdp = synthetic(8, 3, 4);
    let ev = OracleEvaluator::new(mdp.clone());
    let r = run_search(&mdp, &ev, &cfg(8, 8, 8, 3), mdp.root()).unwrap();
    assert_eq!(r.effective_top_m, 4);
    assert_eq!(r.simulations_run, 8);
    assert_eq!(r.root_child_stats.iter().filter(|c| c.candidate).count(), 4);
}

#[test]
fn every_algorithm_conserves_visits() {
    let mdp = synthetic(5, 3, 5);
    let ev = OracleEvaluator::new(mdp.clone());
    for (alg, halving) in [
        (Algorithm::Rescale, true),
        (Algorithm::Rescale, false),
        (Algorithm::AlphaZero, true),
    ] {
        for (n, m) in [(1, 1), (2, 4), (3, 4), (7, 4), (20, 4)] {
            let mut c = cfg(n, 5, m, 3);
            c.algorithm = alg;
            c.sequential_halving_enabled = halving;
            let r = run_search(&mdp, &ev, &c, mdp.root()).unwrap();
            let total: u32 = r.root_child_stats.iter().map(|s| s.visit_count).sum();
            assert_eq!(total, n, "{alg:?} halving={halving} n={n}");
            assert_eq!(r.simulations_run, n);
        }
    }
}

#[test]
fn search_is_deterministic() {
    let mdp = synthetic(6, 3, 8);
    let ev = OracleEvaluator::new(mdp.clone());
    for alg in [Algorithm::Rescale, Algorithm::AlphaZero] {
        let mut c = cfg(20, 6, 6, 3).with_seed(99);
        c.algorithm = alg;
        let s = Searcher::new(&mdp, &ev, &c).unwrap();
        let (a, ta) = s.search(mdp.root(), 0).unwrap();
        let (b, tb) = s.search(mdp.root(), 0).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(ta.dump(), tb.dump());
    }
}

#[test]
fn evaluator_call_accounting_matches() {
    let mdp = synthetic(4, 4, 6);
    let ev = CountingEvaluator::new(OracleEvaluator::new(mdp.clone()));
    let r = run_search(&mdp, &ev, &cfg(16, 4, 4, 4), mdp.root()).unwrap();
    assert_eq!(r.evaluator_calls(), (ev.propose_calls(), ev.value_calls()));
    assert_eq!(r.nodes_expanded as u64, ev.propose_calls());
}

#[test]
fn decode_game24_6666() {
    let env = Game24;
    let ev = OracleEvaluator::new(Game24Oracle::default());
    let traj = decode_episode(&env, &ev, &cfg(16, 12, 8, 4), Game24State::from_ints(&[6, 6, 6, 6])).unwrap();
    assert_eq!(traj.actions.len(), 3);
    assert_eq!(traj.final_text, "24");
    assert_eq!(traj.reward, 1.0);
}

#[test]
fn decode_at_depth_limit_is_empty() {
    let mdp = synthetic(3, 4, 1);
    let ev = OracleEvaluator::new(mdp.clone());
    let config = cfg(4, 3, 3, 2);
    let start = mdp.child(mdp.child(mdp.root(), 0).unwrap(), 1).unwrap();
    let traj = decode_episode_from(&mdp, &ev, &config, start, 2).unwrap();
    assert!(traj.actions.is_empty());
    assert_eq!(traj.reward, mdp.reward(&start));
}

#[test]
fn decode_synthetic_reaches_optimum() {
    for seed in 0..20 {
        let mdp = synthetic(3, 2, seed);
        let ev = OracleEvaluator::new(mdp.clone());
        let traj = decode_episode(&mdp, &ev, &cfg(32, 3, 3, 2), mdp.root()).unwrap();
        assert_eq!(traj.reward, mdp.optimal_value(0), "seed {seed}");
        assert_eq!(traj.actions.len(), 2);
    }
}

#[test]
fn subtree_reuse_saves_evaluations() {
    let mdp = synthetic(3, 3, 2);
    let ev = OracleEvaluator::new(mdp.clone());
    let fresh = decode_episode(&mdp, &ev, &cfg(24, 3, 3, 3), mdp.root()).unwrap();
    let mut c = cfg(24, 3, 3, 3);
    c.subtree_reuse = true;
    let reused = decode_episode(&mdp, &ev, &c, mdp.root()).unwrap();
    assert!(reused.cost.propose_calls < fresh.cost.propose_calls);
    assert_eq!(reused.actions.len(), 3);
}

#[test]
fn first_simulation_reaches_hand_walked_leaf() {
    // 3x3 tree; the first simulation through child 0 expands it and returns
    // its exact value; the second descends to its best-prior grandchild.
    let mdp = synthetic(3, 2, 21);
    let ev = OracleEvaluator::new(mdp.clone());
    let config = cfg(3, 3, 3, 2);
    let s = Searcher::new(&mdp, &ev, &config).unwrap();
    let mut tree = s.new_tree(mdp.root(), 0).unwrap();
    let first: usize = tree.node(tree.root()).children[0].action.parse().unwrap();
    let a = mdp.children(0).nth(first).unwrap();
    assert_eq!(s.run_simulation(&mut tree, 0, 0).unwrap(), mdp.optimal_value(a));
    let v2 = s.run_simulation(&mut tree, 0, 1).unwrap();
    let arms = tree.arm_stats(tree.node(tree.root()).children[0].child);
    let pick = gumbel::select_nonroot_action(
        &arms.iter().map(|a| ArmStats { visits: 0, ..*a }).collect::<Vec<_>>(),
        50.0,
        1.0,
    );
    let node_a = tree.node(tree.node(tree.root()).children[0].child);
    let k: usize = node_a.children[pick].action.parse().unwrap();
    assert_eq!(v2, mdp.leaf_reward(mdp.children(a).nth(k).unwrap()));
}
