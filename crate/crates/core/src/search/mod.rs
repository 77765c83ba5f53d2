//! Tree arena, simulation loop, root controllers and episode decoding.

mod tree;

pub use tree::{ArmStats, CostCounter, Edge, EdgeRef, Node, NodeId, SearchTree};

use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::config::{Algorithm, ConfigError, SearchConfig};
use crate::env::{EnvError, Environment};
use crate::evaluators::{clamp_unit, EvalError, Evaluator};
use crate::gumbel::{self, RootCandidate, SelectError};
use crate::puct;
use crate::rng::{self, label};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("evaluator failed after {simulations_completed} simulations: {source}")]
    Eval {
        #[source]
        source: EvalError,
        simulations_completed: u32,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error("search started from terminal state {0:?}")]
    TerminalRoot(String),
    #[error("root state {0:?} is already at the depth limit")]
    DepthExhausted(String),
    #[error("evaluator proposed no actions for root state {0:?}")]
    NoRootActions(String),
}

/// Diagnostics for one root child after a search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootChildStats {
    pub action: String,
    /// Renormalized proposal probability.
    pub prior: f64,
    /// Prior actually used by root selection (after Dirichlet noise or Gumbel
    /// perturbation; equals `prior` under Sequential Halving).
    pub search_prior: f64,
    pub visit_count: u32,
    pub mean_value: f64,
    pub value_eval: f64,
    pub gumbel: Option<f64>,
    /// ReSCALE: `g + log p + σ(mean)`. AlphaZero: final PUCT score.
    pub root_score: f64,
    /// Whether the child was among the sampled top-m candidates.
    pub candidate: bool,
    pub eliminated_in_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub algorithm: Algorithm,
    pub chosen_action: String,
    pub chosen_index: usize,
    pub root_child_stats: Vec<RootChildStats>,
    pub simulations_run: u32,
    pub nodes_expanded: usize,
    /// Number of top-m candidates actually raced (see [`gumbel::effective_top_m`]).
    pub effective_top_m: usize,
    pub cost: CostCounter,
}

impl SearchResult {
    /// `(propose_calls, value_calls)`.
    pub fn evaluator_calls(&self) -> (u64, u64) {
        (self.cost.propose_calls, self.cost.value_calls)
    }

    /// Share of root visits on the most visited child.
    pub fn max_root_visit_fraction(&self) -> f64 {
        let total: u32 = self.root_child_stats.iter().map(|c| c.visit_count).sum();
        let max = self.root_child_stats.iter().map(|c| c.visit_count).max().unwrap_or(0);
        if total == 0 {
            0.0
        } else {
            max as f64 / total as f64
        }
    }
}

/// Summary of one committed decode step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub state_text: String,
    pub action: String,
    pub simulations_run: u32,
    pub nodes_expanded: usize,
    pub max_root_visit_fraction: f64,
    pub effective_top_m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub actions: Vec<String>,
    pub final_text: String,
    pub reward: f64,
    pub cost: CostCounter,
    pub steps: Vec<StepSummary>,
}

/// One search configuration bound to an environment and an evaluator.
pub struct Searcher<'a, E: Environment, V: Evaluator + ?Sized> {
    env: &'a E,
    evaluator: &'a V,
    config: &'a SearchConfig,
    log_backups: bool,
}

impl<'a, E: Environment, V: Evaluator + ?Sized> Searcher<'a, E, V> {
    pub fn new(env: &'a E, evaluator: &'a V, config: &'a SearchConfig) -> Result<Self, SearchError> {
        config.validate()?;
        Ok(Self {
            env,
            evaluator,
            config,
            log_backups: false,
        })
    }

    /// Record every backup in the tree (see [`SearchTree::backup_log`]).
    pub fn with_backup_log(mut self) -> Self {
        self.log_backups = true;
        self
    }

    pub fn config(&self) -> &SearchConfig {
        self.config
    }

    fn eval_err(sims: u32) -> impl FnOnce(EvalError) -> SearchError {
        move |source| SearchError::Eval {
            source,
            simulations_completed: sims,
        }
    }

    fn make_node(&self, state: E::State, depth: usize, parent: Option<EdgeRef>) -> Node<E::State> {
        Node {
            text: self.env.canonical_text(&state),
            is_terminal: self.env.is_terminal(&state),
            state,
            depth,
            value_eval: None,
            parent,
            children: Vec::new(),
            expanded: false,
        }
    }

    /// Single-node tree for `root_state`, expanded immediately.
    pub fn new_tree(&self, root_state: E::State, root_depth: usize) -> Result<SearchTree<E::State>, SearchError> {
        let root = self.make_node(root_state, root_depth, None);
        if root.is_terminal {
            return Err(SearchError::TerminalRoot(root.text));
        }
        if root_depth >= self.config.max_depth {
            return Err(SearchError::DepthExhausted(root.text));
        }
        let mut tree = SearchTree::with_root(root);
        if self.log_backups {
            tree.enable_backup_log();
        }
        let mut rng = rng::stream(self.config.rng_seed, &[label::ROOT]);
        self.expand_leaf(&mut tree, NodeId(0), &mut rng, 0)?;
        if tree.node(tree.root()).children.is_empty() {
            return Err(SearchError::NoRootActions(tree.node(tree.root()).text.clone()));
        }
        Ok(tree)
    }

    /// Proposes up to `w` actions, merges duplicate texts (summing raw
    /// probabilities), renormalizes, and evaluates every new child once.
    /// A node with no proposals becomes terminal and takes the environment
    /// reward as its value.
    pub fn expand_leaf(
        &self,
        tree: &mut SearchTree<E::State>,
        id: NodeId,
        rng: &mut dyn RngCore,
        sims_done: u32,
    ) -> Result<Vec<EdgeRef>, SearchError> {
        let w = self.config.expansion_width;
        let node = &tree.nodes[id.0];
        debug_assert!(!node.expanded && !node.is_terminal && node.depth < self.config.max_depth);
        let proposals = self
            .evaluator
            .propose(&node.text, w, rng)
            .map_err(Self::eval_err(sims_done))?;
        tree.cost.propose_calls += 1;
        tree.cost.action_chars += proposals
            .iter()
            .map(|p| p.action_text.chars().count() as u64)
            .sum::<u64>();

        let mut merged: Vec<(String, f64)> = Vec::with_capacity(proposals.len());
        for p in proposals {
            let mass = if p.raw_prob.is_finite() && p.raw_prob > 0.0 {
                p.raw_prob
            } else {
                0.0
            };
            match merged.iter_mut().find(|(t, _)| *t == p.action_text) {
                Some((_, m)) => *m += mass,
                None => merged.push((p.action_text, mass)),
            }
        }
        if merged.len() > w {
            merged.sort_by(|a, b| b.1.total_cmp(&a.1));
            merged.truncate(w);
        }
        tree.nodes_expanded += 1;
        tree.nodes[id.0].expanded = true;

        if merged.is_empty() {
            let node = &mut tree.nodes[id.0];
            node.is_terminal = true;
            node.value_eval = Some(clamp_unit(self.env.reward(&node.state)));
            return Ok(Vec::new());
        }

        let total: f64 = merged.iter().map(|(_, m)| m).sum();
        let k = merged.len() as f64;
        let depth = tree.nodes[id.0].depth + 1;
        let mut edges = Vec::with_capacity(merged.len());
        for (i, (action, mass)) in merged.into_iter().enumerate() {
            let prior = if total > 0.0 { mass / total } else { 1.0 / k };
            let next = self.env.step(&tree.nodes[id.0].state, &action)?;
            let edge_ref = EdgeRef { node: id, edge: i };
            let mut child = self.make_node(next, depth, Some(edge_ref));
            child.is_terminal |= self.env.is_stop_action(&action);
            let v = if child.is_terminal {
                clamp_unit(self.env.reward(&child.state))
            } else {
                tree.cost.value_calls += 1;
                clamp_unit(self.evaluator.value(&child.text).map_err(Self::eval_err(sims_done))?)
            };
            child.value_eval = Some(v);
            let child_id = NodeId(tree.nodes.len());
            tree.nodes.push(child);
            tree.nodes[id.0].children.push(Edge {
                action,
                prior,
                visit_count: 0,
                mean_value: v,
                child: child_id,
            });
            edges.push(edge_ref);
        }
        Ok(edges)
    }

    /// One simulation through root child `root_edge`: descend with the in-tree
    /// rule until an unexpanded, terminal or depth-capped node, then back up.
    pub fn run_simulation(
        &self,
        tree: &mut SearchTree<E::State>,
        root_edge: usize,
        sim: u32,
    ) -> Result<f64, SearchError> {
        let mut rng = rng::stream(self.config.rng_seed, &[label::SIMULATION, sim as u64]);
        let root = tree.root();
        let mut path = vec![EdgeRef {
            node: root,
            edge: root_edge,
        }];
        let mut cur = tree.nodes[root.0].children[root_edge].child;
        let v_leaf = loop {
            let node = &tree.nodes[cur.0];
            if node.is_terminal || node.depth >= self.config.max_depth {
                break node.value_eval.expect("non-root nodes are evaluated on creation");
            }
            if !node.expanded {
                self.expand_leaf(tree, cur, &mut rng, sim)?;
                break tree.nodes[cur.0].value_eval.expect("evaluated on creation");
            }
            let arms = tree.arm_stats(cur);
            let a = match self.config.algorithm {
                Algorithm::Rescale => gumbel::select_nonroot_action(&arms, self.config.c_visit, self.config.c_scale),
                Algorithm::AlphaZero => puct::puct_select(&arms, &self.config.puct),
            };
            path.push(EdgeRef { node: cur, edge: a });
            cur = tree.nodes[cur.0].children[a].child;
        };
        tree.backpropagate(&path, v_leaf);
        Ok(v_leaf)
    }

    /// Builds a fresh tree and runs the full search.
    pub fn search(
        &self,
        root_state: E::State,
        root_depth: usize,
    ) -> Result<(SearchResult, SearchTree<E::State>), SearchError> {
        let tree = self.new_tree(root_state, root_depth)?;
        self.search_tree(tree)
    }

    /// Runs `N` simulations on an already expanded tree (fresh or reused).
    pub fn search_tree(
        &self,
        mut tree: SearchTree<E::State>,
    ) -> Result<(SearchResult, SearchTree<E::State>), SearchError> {
        let root = tree.root();
        if !tree.node(root).expanded {
            let mut rng = rng::stream(self.config.rng_seed, &[label::ROOT]);
            self.expand_leaf(&mut tree, root, &mut rng, 0)?;
        }
        if tree.node(root).children.is_empty() {
            return Err(SearchError::NoRootActions(tree.node(root).text.clone()));
        }
        if self.log_backups {
            tree.enable_backup_log();
        }
        let outcome = match self.config.algorithm {
            Algorithm::Rescale if self.config.sequential_halving_enabled => self.root_halving(&mut tree)?,
            Algorithm::Rescale => self.root_gumbel_puct(&mut tree)?,
            Algorithm::AlphaZero => self.root_alphazero(&mut tree)?,
        };
        let result = self.finish(&tree, outcome);
        Ok((result, tree))
    }

    fn root_priors(&self, tree: &SearchTree<E::State>) -> Vec<f64> {
        tree.node(tree.root()).children.iter().map(|e| e.prior).collect()
    }

    fn sample_candidates(&self, tree: &SearchTree<E::State>, m: usize) -> Result<Vec<RootCandidate>, SearchError> {
        let log_priors: Vec<f64> = self.root_priors(tree).into_iter().map(gumbel::safe_log).collect();
        let mut rng = rng::stream(self.config.rng_seed, &[label::ROOT, 1]);
        Ok(gumbel::gumbel_top_m(
            &log_priors,
            m,
            self.config.gumbel_enabled,
            &mut rng,
        )?)
    }

    /// Gumbel top-m plus Sequential Halving. Each round deals its budget
    /// round-robin over survivors in score order; leftover simulations go to
    /// the final round.
    fn root_halving(&self, tree: &mut SearchTree<E::State>) -> Result<RootOutcome, SearchError> {
        let (cv, cs) = (self.config.c_visit, self.config.c_scale);
        let n = self.config.num_simulations;
        let children = tree.node(tree.root()).children.len();
        let m = gumbel::effective_top_m(self.config.root_top_m.min(children), n);
        let mut cands = self.sample_candidates(tree, m)?;
        let schedule = gumbel::halving_schedule(m, n);
        let mut sim = 0u32;
        let last = schedule.rounds.len() - 1;
        for (k, round) in schedule.rounds.iter().enumerate() {
            let order: Vec<usize> = gumbel::ranked_alive(&cands, &tree.arm_stats(tree.root()), cv, cs)
                .into_iter()
                .map(|i| cands[i].action_index)
                .collect();
            debug_assert_eq!(order.len(), round.survivors);
            let mut budget = round.sims_per_survivor * round.survivors as u32;
            if k == last {
                budget += schedule.extra_final_sims;
            }
            for j in 0..budget {
                self.run_simulation(tree, order[j as usize % order.len()], sim)?;
                sim += 1;
            }
            gumbel::halving_eliminate(&mut cands, &tree.arm_stats(tree.root()), cv, cs, k)?;
        }
        let arms = tree.arm_stats(tree.root());
        let chosen = gumbel::select_final_root_action(&cands, &arms, true, cv, cs)?;
        Ok(RootOutcome {
            chosen,
            simulations: sim,
            effective_top_m: m,
            search_priors: self.root_priors(tree),
            candidates: Some(cands),
        })
    }

    /// Ablation without Sequential Halving: PUCT over the sampled candidates
    /// with priors `softmax(log p + g)`.
    fn root_gumbel_puct(&self, tree: &mut SearchTree<E::State>) -> Result<RootOutcome, SearchError> {
        let (cv, cs) = (self.config.c_visit, self.config.c_scale);
        let children = tree.node(tree.root()).children.len();
        let m = self.config.root_top_m.min(children);
        let cands = self.sample_candidates(tree, m)?;
        let alive: Vec<&RootCandidate> = cands.iter().filter(|c| c.alive).collect();
        let perturbed = gumbel::softmax(&alive.iter().map(|c| c.score()).collect::<Vec<_>>());
        let mut search_priors = vec![0.0; children];
        for (c, p) in alive.iter().zip(&perturbed) {
            search_priors[c.action_index] = *p;
        }
        for sim in 0..self.config.num_simulations {
            let arms = tree.arm_stats(tree.root());
            let sub: Vec<ArmStats> = alive
                .iter()
                .map(|c| ArmStats {
                    prior: search_priors[c.action_index],
                    ..arms[c.action_index]
                })
                .collect();
            let pick = puct::puct_select(&sub, &self.config.puct);
            self.run_simulation(tree, alive[pick].action_index, sim)?;
        }
        let arms = tree.arm_stats(tree.root());
        let chosen = gumbel::select_final_root_action(&cands, &arms, false, cv, cs)?;
        Ok(RootOutcome {
            chosen,
            simulations: self.config.num_simulations,
            effective_top_m: m,
            search_priors,
            candidates: Some(cands),
        })
    }

    fn root_alphazero(&self, tree: &mut SearchTree<E::State>) -> Result<RootOutcome, SearchError> {
        let params = &self.config.puct;
        let mut noise_rng = rng::stream(self.config.rng_seed, &[label::ROOT, 1]);
        let noisy = puct::apply_dirichlet_noise(&self.root_priors(tree), params, &mut noise_rng);
        let noisy_arms = |tree: &SearchTree<E::State>| -> Vec<ArmStats> {
            tree.arm_stats(tree.root())
                .into_iter()
                .zip(&noisy)
                .map(|(a, &p)| ArmStats { prior: p, ..a })
                .collect()
        };
        for sim in 0..self.config.num_simulations {
            let pick = puct::puct_select(&noisy_arms(tree), params);
            self.run_simulation(tree, pick, sim)?;
        }
        let mut final_rng = rng::stream(self.config.rng_seed, &[label::FINAL]);
        let chosen = puct::visit_count_action(
            &noisy_arms(tree),
            params.temperature,
            params.greedy_temperature,
            &mut final_rng,
        )?;
        Ok(RootOutcome {
            chosen,
            simulations: self.config.num_simulations,
            effective_top_m: noisy.len(),
            search_priors: noisy,
            candidates: None,
        })
    }

    fn finish(&self, tree: &SearchTree<E::State>, out: RootOutcome) -> SearchResult {
        let (cv, cs) = (self.config.c_visit, self.config.c_scale);
        let root = tree.node(tree.root());
        let arms = tree.arm_stats(tree.root());
        let max_n = gumbel::max_visits(&arms);
        let puct_scores = match self.config.algorithm {
            Algorithm::AlphaZero => {
                let noisy: Vec<ArmStats> = arms
                    .iter()
                    .zip(&out.search_priors)
                    .map(|(a, &p)| ArmStats { prior: p, ..*a })
                    .collect();
                Some(puct::puct_scores(&noisy, &self.config.puct))
            }
            Algorithm::Rescale => None,
        };
        let mut by_index: Vec<Option<&RootCandidate>> = vec![None; arms.len()];
        if let Some(cands) = &out.candidates {
            for c in cands {
                by_index[c.action_index] = Some(c);
            }
        }
        let root_child_stats = root
            .children
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let cand = by_index[i];
                let root_score = match (&puct_scores, cand) {
                    (Some(s), _) => s[i],
                    (None, Some(c)) => gumbel::updated_score(c, &arms[i], max_n, cv, cs),
                    (None, None) => f64::NAN,
                };
                RootChildStats {
                    action: e.action.clone(),
                    prior: e.prior,
                    search_prior: out.search_priors[i],
                    visit_count: e.visit_count,
                    mean_value: e.mean_value,
                    value_eval: arms[i].value_eval,
                    gumbel: cand.map(|c| c.gumbel),
                    root_score,
                    candidate: cand.is_some_and(|c| c.alive || c.eliminated_in_round.is_some()),
                    eliminated_in_round: cand.and_then(|c| c.eliminated_in_round),
                }
            })
            .collect();
        SearchResult {
            algorithm: self.config.algorithm,
            chosen_action: root.children[out.chosen].action.clone(),
            chosen_index: out.chosen,
            root_child_stats,
            simulations_run: out.simulations,
            nodes_expanded: tree.nodes_expanded(),
            effective_top_m: out.effective_top_m,
            cost: tree.cost(),
        }
    }
}

struct RootOutcome {
    chosen: usize,
    simulations: u32,
    effective_top_m: usize,
    search_priors: Vec<f64>,
    candidates: Option<Vec<RootCandidate>>,
}

/// Runs one search from `root_state` at depth 0.
pub fn run_search<E: Environment, V: Evaluator + ?Sized>(
    env: &E,
    evaluator: &V,
    config: &SearchConfig,
    root_state: E::State,
) -> Result<SearchResult, SearchError> {
    Searcher::new(env, evaluator, config)?
        .search(root_state, 0)
        .map(|(r, _)| r)
}

/// Decodes a full episode from depth 0. See [`decode_episode_from`].
pub fn decode_episode<E: Environment, V: Evaluator + ?Sized>(
    env: &E,
    evaluator: &V,
    config: &SearchConfig,
    initial_state: E::State,
) -> Result<Trajectory, SearchError> {
    decode_episode_from(env, evaluator, config, initial_state, 0)
}

/// Repeats search and commits the chosen action until a terminal state, a
/// stop action, or the depth limit. Step `t` searches with seed
/// `derive_seed(rng_seed, [STEP, t])`.
pub fn decode_episode_from<E: Environment, V: Evaluator + ?Sized>(
    env: &E,
    evaluator: &V,
    config: &SearchConfig,
    initial_state: E::State,
    initial_depth: usize,
) -> Result<Trajectory, SearchError> {
    config.validate()?;
    let mut state = initial_state;
    let mut depth = initial_depth;
    let mut actions = Vec::new();
    let mut steps = Vec::new();
    let mut cost = CostCounter::default();
    let mut reused: Option<SearchTree<E::State>> = None;
    while !env.is_terminal(&state) && depth < config.max_depth {
        let step_config = config.with_seed(rng::derive_seed(config.rng_seed, &[label::STEP, depth as u64]));
        let searcher = Searcher::new(env, evaluator, &step_config)?;
        let (result, tree) = match reused.take() {
            Some(t) => searcher.search_tree(t)?,
            None => searcher.search(state.clone(), depth)?,
        };
        cost.add(&result.cost);
        steps.push(StepSummary {
            state_text: env.canonical_text(&state),
            action: result.chosen_action.clone(),
            simulations_run: result.simulations_run,
            nodes_expanded: result.nodes_expanded,
            max_root_visit_fraction: result.max_root_visit_fraction(),
            effective_top_m: result.effective_top_m,
        });
        let child = tree.node(tree.root()).children[result.chosen_index].child;
        state = tree.node(child).state.clone();
        depth += 1;
        let stop = env.is_stop_action(&result.chosen_action);
        actions.push(result.chosen_action);
        if stop {
            break;
        }
        if config.subtree_reuse && tree.node(child).expanded && !tree.node(child).children.is_empty() {
            reused = Some(tree.subtree(child));
        }
    }
    Ok(Trajectory {
        actions,
        final_text: env.canonical_text(&state),
        reward: env.reward(&state),
        cost,
        steps,
    })
}

#[cfg(test)]
mod tests;
