//! Verbose single-problem runs for the `run` subcommand.

use std::fmt::Write as _;

use rescale_core::env::game24::Game24State;
use rescale_core::env::Game24;
use rescale_core::evaluators::Oracle;
use rescale_core::rng::{self, label};
use rescale_core::search::Searcher;
use rescale_core::{decode_episode, Environment, Evaluator, SearchConfig};

use crate::jobs::{best_of_n, JobRunner, ProblemSet};
use crate::spec::{GridPoint, Method};
use crate::HarnessError;

/// Runs one problem and renders the trajectory followed by a dump of the
/// first decision's search tree.
pub fn explain(
    runner: &JobRunner<'_>,
    method: Method,
    grid: &GridPoint,
    problem_id: usize,
    seed: u64,
) -> Result<String, HarnessError> {
    if problem_id >= runner.problems.len() {
        return Err(HarnessError::Spec(format!(
            "problem {problem_id} out of range (have {})",
            runner.problems.len()
        )));
    }
    let config = runner.config(method, grid, problem_id, seed);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "problem {problem_id}: {}\nmethod {method}, budget {} (N={} w={} M={} d={}), seed {seed}",
        runner.problems.describe(problem_id),
        grid.label,
        grid.sims,
        grid.width,
        grid.top_m,
        grid.depth
    );
    match runner.problems {
        ProblemSet::Game24 { problems, oracle } => {
            let ev = runner.evaluator(oracle.clone(), problem_id, seed);
            let init = Game24State::from_ints(&problems[problem_id]);
            render(&mut out, &Game24, &**oracle, &*ev, init, method, &config)?;
        }
        ProblemSet::Synthetic { trees } => {
            let tree = &trees[problem_id];
            let ev = runner.evaluator(tree.clone(), problem_id, seed);
            render(&mut out, &**tree, &**tree, &*ev, tree.root(), method, &config)?;
        }
    }
    Ok(out)
}

fn render<E: Environment>(
    out: &mut String,
    env: &E,
    oracle: &dyn Oracle,
    ev: &dyn Evaluator,
    init: E::State,
    method: Method,
    config: &SearchConfig,
) -> Result<(), HarnessError> {
    let root_value = oracle.exact_value(&env.canonical_text(&init))?;
    let _ = writeln!(out, "optimal value of the start state: {root_value}");
    if method == Method::BestOfN {
        let b = best_of_n(
            env,
            ev,
            init,
            config.num_simulations,
            config.expansion_width,
            config.max_depth,
            config.rng_seed,
        )?;
        for (i, s) in b.scores.iter().enumerate() {
            let _ = writeln!(
                out,
                "rollout {i:>3}: score {s:.4}{}",
                if i == b.chosen { "  <- chosen" } else { "" }
            );
        }
        let _ = writeln!(
            out,
            "chosen actions: {:?}\nfinal state: {}\nreward: {}\ncost: {:?}",
            b.actions,
            env.canonical_text(&b.final_state),
            env.reward(&b.final_state),
            b.cost
        );
        return Ok(());
    }

    let t = decode_episode(env, ev, config, init.clone())?;
    for (i, s) in t.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "step {i}: [{}] -> {:?}  (sims {}, expanded {}, top-m {}, max visit fraction {:.3})",
            s.state_text, s.action, s.simulations_run, s.nodes_expanded, s.effective_top_m, s.max_root_visit_fraction
        );
    }
    let _ = writeln!(
        out,
        "final state: {}\nreward: {}\ncost: {:?}",
        t.final_text, t.reward, t.cost
    );

    // same seed as the first decode step, so this is the tree behind step 0
    let first = config.with_seed(rng::derive_seed(config.rng_seed, &[label::STEP, 0]));
    let (result, tree) = Searcher::new(env, ev, &first)?.search(init, 0)?;
    let _ = writeln!(out, "\nroot children of the first search:");
    let _ = writeln!(
        out,
        "action\tprior\tvisits\tmean\tvalue_eval\tgumbel\tscore\teliminated"
    );
    for c in &result.root_child_stats {
        let _ = writeln!(
            out,
            "{:?}\t{:.4}\t{}\t{:.4}\t{:.4}\t{}\t{:.3}\t{}",
            c.action,
            c.prior,
            c.visit_count,
            c.mean_value,
            c.value_eval,
            c.gumbel.map_or("-".to_string(), |g| format!("{g:.3}")),
            c.root_score,
            c.eliminated_in_round.map_or("-".to_string(), |r| r.to_string())
        );
    }
    let _ = writeln!(out, "\ntree dump of the first search:\n{}", tree.dump());
    Ok(())
}
