//! Prints prior-greedy root optimality and search root-decision accuracy for a
//! grid of synthetic reward parameters.
//!
//! cargo run --release -p rescale-core --example calibrate_synthetic -- [problems]

use rescale_core::env::{SyntheticParams, SyntheticTreeMdp};
use rescale_core::evaluators::{NoisyEvaluator, OracleEvaluator};
use rescale_core::{run_search, Algorithm, SearchConfig};

fn greedy_child(mdp: &SyntheticTreeMdp) -> usize {
    mdp.children(0)
        .max_by(|&a, &b| mdp.logit(a).total_cmp(&mdp.logit(b)).then(b.cmp(&a)))
        .unwrap()
}

fn main() {
    let problems: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    for threshold in [3.25, 3.5, 3.75] {
        for sharpness in [3.0, 4.0, 6.0] {
            let mut greedy_ok = 0;
            let mut greedy_solvable = 0;
            let mut solvable = 0;
            let mut optimal_children = 0usize;
            let mut acc = [[0u32; 3]; 2];
            for seed in 0..problems {
                let mdp = SyntheticTreeMdp::generate(SyntheticParams {
                    seed,
                    reward_threshold: threshold,
                    reward_sharpness: sharpness,
                    ..SyntheticParams::default()
                })
                .unwrap();
                let root_v = mdp.optimal_value(0);
                if root_v > 0.0 {
                    solvable += 1;
                    optimal_children += mdp.children(0).filter(|&c| mdp.optimal_value(c) == root_v).count();
                }
                if mdp.optimal_value(greedy_child(&mdp)) == root_v {
                    greedy_ok += 1;
                    if root_v > 0.0 {
                        greedy_solvable += 1;
                    }
                }
                let ev = NoisyEvaluator::new(OracleEvaluator::new(mdp.clone()), 0.2, seed);
                for (ai, alg) in [Algorithm::Rescale, Algorithm::AlphaZero].into_iter().enumerate() {
                    for (ni, n) in [8, 24, 64].into_iter().enumerate() {
                        let config = SearchConfig {
                            num_simulations: n,
                            algorithm: alg,
                            rng_seed: seed,
                            ..SearchConfig::default()
                        };
                        let r = run_search(&mdp, &ev, &config, mdp.root()).unwrap();
                        let k: usize = r.chosen_action.parse().unwrap();
                        let child = mdp.children(0).nth(k).unwrap();
                        if mdp.optimal_value(child) == root_v {
                            acc[ai][ni] += 1;
                        }
                    }
                }
            }
            let pct = |x: u32| 100.0 * x as f64 / problems as f64;
            println!(
                "thr={threshold} sharp={sharpness}: greedy={:.1}% greedy|solvable={:.1}% solvable={:.1}% opt_children/solvable={:.2} \
                 rescale={:.1}/{:.1}/{:.1} az={:.1}/{:.1}/{:.1}",
                pct(greedy_ok),
                100.0 * greedy_solvable as f64 / solvable.max(1) as f64,
                pct(solvable),
                optimal_children as f64 / solvable.max(1) as f64,
                pct(acc[0][0]),
                pct(acc[0][1]),
                pct(acc[0][2]),
                pct(acc[1][0]),
                pct(acc[1][1]),
                pct(acc[1][2]),
            );
        }
    }
}
