//! Problem sets and the execution of a single `(method, budget, problem, seed)`
//! job.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rescale_core::env::game24::{load_problems, Game24State};
use rescale_core::env::{Game24, SyntheticParams, SyntheticTreeMdp};
use rescale_core::evaluators::{Game24Oracle, NoisyEvaluator, Oracle, OracleEvaluator, RemoteConfig, RemoteEvaluator};
use rescale_core::rng::{self, label};
use rescale_core::search::Searcher;
use rescale_core::{decode_episode, CostCounter, Environment, Evaluator, SearchConfig};

use crate::spec::{EnvKind, EvaluatorSpec, GridPoint, Method, Scope, SweepSpec};
use crate::HarnessError;

/// Default number of generated synthetic instances.
pub const DEFAULT_SYNTHETIC_PROBLEMS: usize = 100;

/// The instances of one sweep, indexed by `problem_id`.
pub enum ProblemSet {
    Game24 {
        problems: Vec<[i64; 4]>,
        oracle: Arc<Game24Oracle>,
    },
    Synthetic {
        trees: Vec<Arc<SyntheticTreeMdp>>,
    },
}

impl ProblemSet {
    pub fn from_spec(spec: &SweepSpec) -> Result<Self, HarnessError> {
        match spec.env {
            EnvKind::Game24 => {
                let path = &spec.game24.problems;
                let mut problems = load_problems(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                if let Some(n) = spec.problems {
                    if n > problems.len() {
                        return Err(HarnessError::Spec(format!(
                            "{} has {} problems, {n} requested",
                            path.display(),
                            problems.len()
                        )));
                    }
                    problems.truncate(n);
                }
                let g = &spec.game24;
                Ok(ProblemSet::Game24 {
                    problems,
                    oracle: Arc::new(Game24Oracle::new(g.beta, g.prior_noise, g.prior_seed)),
                })
            }
            EnvKind::Synthetic => Ok(Self::synthetic(
                spec.synthetic,
                spec.problems.unwrap_or(DEFAULT_SYNTHETIC_PROBLEMS),
            )?),
        }
    }

    /// `count` trees with seeds `params.seed + id`.
    pub fn synthetic(params: SyntheticParams, count: usize) -> Result<Self, HarnessError> {
        let trees = (0..count as u64)
            .map(|id| {
                SyntheticTreeMdp::generate(SyntheticParams {
                    seed: params.seed.wrapping_add(id),
                    ..params
                })
                .map(Arc::new)
            })
            .collect::<Result<_, _>>()?;
        Ok(ProblemSet::Synthetic { trees })
    }

    pub fn len(&self) -> usize {
        match self {
            ProblemSet::Game24 { problems, .. } => problems.len(),
            ProblemSet::Synthetic { trees } => trees.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Human-readable identity of problem `id`.
    pub fn describe(&self, id: usize) -> String {
        match self {
            ProblemSet::Game24 { problems, .. } => Game24State::from_ints(&problems[id]).canonical_text(),
            ProblemSet::Synthetic { trees } => format!("synthetic tree seed {}", trees[id].params().seed),
        }
    }
}

/// Measured outcome of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub correct: bool,
    pub sims: u64,
    pub nodes_expanded: u64,
    pub cost: CostCounter,
    /// First-decision visit concentration; `None` when no decision was made.
    pub max_root_visit_fraction: Option<f64>,
}

/// Shared state for running jobs of one sweep.
pub struct JobRunner<'a> {
    pub spec: &'a SweepSpec,
    pub problems: &'a ProblemSet,
    remote: Option<Arc<RemoteEvaluator>>,
}

impl<'a> JobRunner<'a> {
    pub fn new(spec: &'a SweepSpec, problems: &'a ProblemSet) -> Self {
        let remote = match &spec.evaluator {
            EvaluatorSpec::Remote { url } => Some(Arc::new(RemoteEvaluator::new(RemoteConfig::new(url.as_str())))),
            _ => None,
        };
        Self { spec, problems, remote }
    }

    /// Seed of the search (or rollouts) for problem `id` under run seed `seed`.
    /// It depends on nothing else, so problems are isolated from each other.
    pub fn search_seed(seed: u64, problem_id: usize) -> u64 {
        rng::derive_seed(seed, &[label::PROBLEM, problem_id as u64])
    }

    pub fn noise_seed(seed: u64, problem_id: usize) -> u64 {
        rng::derive_seed(seed, &[label::VALUE_NOISE, problem_id as u64])
    }

    pub fn config(&self, method: Method, grid: &GridPoint, problem_id: usize, seed: u64) -> SearchConfig {
        self.spec
            .search_config(method, grid, Self::search_seed(seed, problem_id))
    }

    pub fn evaluator(&self, oracle: Arc<dyn Oracle>, problem_id: usize, seed: u64) -> Box<dyn Evaluator> {
        match &self.spec.evaluator {
            EvaluatorSpec::Oracle => Box::new(OracleEvaluator::new(oracle)),
            EvaluatorSpec::Noisy { sigma } => Box::new(NoisyEvaluator::new(
                OracleEvaluator::new(oracle),
                *sigma,
                Self::noise_seed(seed, problem_id),
            )),
            EvaluatorSpec::Remote { .. } => Box::new(self.remote.clone().expect("remote client exists")),
        }
    }

    pub fn run(&self, method: Method, grid: &GridPoint, problem_id: usize, seed: u64) -> Result<Outcome, HarnessError> {
        let config = self.config(method, grid, problem_id, seed);
        let scope = self.spec.scope;
        match self.problems {
            ProblemSet::Game24 { problems, oracle } => {
                let ev = self.evaluator(oracle.clone(), problem_id, seed);
                let init = Game24State::from_ints(&problems[problem_id]);
                execute(&Game24, &**oracle, &*ev, init, method, &config, scope)
            }
            ProblemSet::Synthetic { trees } => {
                let tree = &trees[problem_id];
                let ev = self.evaluator(tree.clone(), problem_id, seed);
                execute(&**tree, &**tree, &*ev, tree.root(), method, &config, scope)
            }
        }
    }
}

fn solved(reward: f64) -> bool {
    reward >= 1.0
}

/// Runs one method on one initial state. Root decisions are judged with the
/// oracle's exact values: correct iff the chosen child keeps `V*` of the root.
pub fn execute<E: Environment>(
    env: &E,
    oracle: &dyn Oracle,
    evaluator: &dyn Evaluator,
    init: E::State,
    method: Method,
    config: &SearchConfig,
    scope: Scope,
) -> Result<Outcome, HarnessError> {
    let root_text = env.canonical_text(&init);
    let keeps_optimum = |child: &E::State| -> Result<bool, HarnessError> {
        let root = oracle.exact_value(&root_text)?;
        Ok(oracle.exact_value(&env.canonical_text(child))? == root)
    };
    match (method, scope) {
        (Method::BestOfN, _) => {
            let b = best_of_n(
                env,
                evaluator,
                init.clone(),
                config.num_simulations,
                config.expansion_width,
                config.max_depth,
                config.rng_seed,
            )?;
            let correct = match scope {
                Scope::Episode => solved(env.reward(&b.final_state)),
                Scope::RootDecision => match &b.first_state {
                    Some(s) => keeps_optimum(s)?,
                    None => false,
                },
            };
            Ok(Outcome {
                correct,
                sims: u64::from(config.num_simulations),
                nodes_expanded: b.cost.propose_calls,
                cost: b.cost,
                max_root_visit_fraction: b.max_first_action_fraction,
            })
        }
        (_, Scope::Episode) => {
            let t = decode_episode(env, evaluator, config, init)?;
            Ok(Outcome {
                correct: solved(t.reward),
                sims: t.steps.iter().map(|s| u64::from(s.simulations_run)).sum(),
                nodes_expanded: t.steps.iter().map(|s| s.nodes_expanded as u64).sum(),
                cost: t.cost,
                max_root_visit_fraction: t.steps.first().map(|s| s.max_root_visit_fraction),
            })
        }
        (_, Scope::RootDecision) => {
            let (result, tree) = Searcher::new(env, evaluator, config)?.search(init.clone(), 0)?;
            let child = tree.node(tree.root()).children[result.chosen_index].child;
            Ok(Outcome {
                correct: keeps_optimum(&tree.node(child).state)?,
                sims: u64::from(result.simulations_run),
                nodes_expanded: result.nodes_expanded as u64,
                max_root_visit_fraction: Some(result.max_root_visit_fraction()),
                cost: result.cost,
            })
        }
    }
}

/// Result of sampling `n` rollouts and keeping the best-scored one.
#[derive(Debug, Clone)]
pub struct BestOfN<S> {
    /// Index of the winning rollout.
    pub chosen: usize,
    pub final_state: S,
    pub actions: Vec<String>,
    /// State after the winner's first action.
    pub first_state: Option<S>,
    /// Evaluator score of every rollout's final state, in sampling order.
    pub scores: Vec<f64>,
    pub cost: CostCounter,
    /// Share of rollouts whose first action is the most common first action.
    pub max_first_action_fraction: Option<f64>,
}

struct Rollout<S> {
    actions: Vec<String>,
    first_state: Option<S>,
    final_state: S,
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let clean: Vec<f64> = weights
        .iter()
        .map(|&w| if w.is_finite() && w > 0.0 { w } else { 0.0 })
        .collect();
    match WeightedIndex::new(&clean) {
        Ok(d) => d.sample(rng),
        Err(_) => rng.random_range(0..weights.len()),
    }
}

/// Samples `n` rollouts, rollout `i` drawing from `stream(seed, [ROLLOUT, i])`.
/// Each step samples an action in proportion to the raw proposal
/// probabilities of `propose(state, width)`; a rollout ends at a terminal
/// state, a stop action, a dead end or after `max_depth` actions. The final
/// states are scored with `value`; ties go to the earliest rollout.
pub fn best_of_n<E: Environment, V: Evaluator + ?Sized>(
    env: &E,
    evaluator: &V,
    init: E::State,
    n: u32,
    width: usize,
    max_depth: usize,
    seed: u64,
) -> Result<BestOfN<E::State>, HarnessError> {
    if n == 0 {
        return Err(HarnessError::Spec("best-of-n needs n >= 1".into()));
    }
    let mut cost = CostCounter::default();
    let mut rollouts = Vec::with_capacity(n as usize);
    let mut scores = Vec::with_capacity(n as usize);
    for i in 0..n {
        let mut rng = rng::stream(seed, &[label::ROLLOUT, u64::from(i)]);
        let mut state = init.clone();
        let mut actions = Vec::new();
        let mut first_state = None;
        while !env.is_terminal(&state) && actions.len() < max_depth {
            let proposals = evaluator.propose(&env.canonical_text(&state), width, &mut rng)?;
            cost.propose_calls += 1;
            cost.action_chars += proposals
                .iter()
                .map(|p| p.action_text.chars().count() as u64)
                .sum::<u64>();
            if proposals.is_empty() {
                break;
            }
            let weights: Vec<f64> = proposals.iter().map(|p| p.raw_prob).collect();
            let action = &proposals[sample_index(&weights, &mut rng)].action_text;
            state = env.step(&state, action)?;
            if first_state.is_none() {
                first_state = Some(state.clone());
            }
            actions.push(action.clone());
            if env.is_stop_action(action) {
                break;
            }
        }
        scores.push(evaluator.value(&env.canonical_text(&state))?);
        cost.value_calls += 1;
        rollouts.push(Rollout {
            actions,
            first_state,
            final_state: state,
        });
    }
    let mut chosen = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[chosen] {
            chosen = i;
        }
    }
    let mut first_counts: Vec<(&str, u32)> = Vec::new();
    for r in &rollouts {
        if let Some(a) = r.actions.first() {
            match first_counts.iter_mut().find(|(t, _)| *t == a.as_str()) {
                Some((_, c)) => *c += 1,
                None => first_counts.push((a.as_str(), 1)),
            }
        }
    }
    let max_first_action_fraction = first_counts
        .iter()
        .map(|&(_, c)| c)
        .max()
        .map(|c| f64::from(c) / f64::from(n));
    let winner = rollouts.swap_remove(chosen);
    Ok(BestOfN {
        chosen,
        final_state: winner.final_state,
        actions: winner.actions,
        first_state: winner.first_state,
        scores,
        cost,
        max_first_action_fraction,
    })
}
