//! Synthetic full b-ary tree MDP with a known optimal value table.
//!
//! Every non-root node carries a latent edge quality `q ~ N(0, 1)`; the path
//! quality of a leaf is the sum along its path. A leaf pays reward 1 with
//! probability `sigmoid(sharpness · (path / sqrt(D) - threshold))`, else 0.
//! The prior logit of every child is `β · V*(child) + N(0, σ_prior)`, which
//! gives a proposal distribution that correlates with quality but is
//! miscalibrated.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub branching: usize,
    pub depth: usize,
    pub seed: u64,
    /// Weight of `V*(child)` in the child's prior logit.
    pub beta: f64,
    /// Standard deviation of the Gaussian noise on prior logits.
    pub prior_noise: f64,
    pub reward_threshold: f64,
    pub reward_sharpness: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            branching: 8,
            depth: 4,
            seed: 0,
            beta: 2.0,
            prior_noise: 1.0,
            reward_threshold: 3.5,
            reward_sharpness: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SyntheticState {
    pub index: usize,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticTreeMdp {
    params: SyntheticParams,
    /// First node index of every level, plus the total node count at the end.
    level_start: Vec<usize>,
    /// Leaf rewards, indexed by node (0 for internal nodes).
    rewards: Vec<f64>,
    /// Prior logit of each node relative to its siblings (root unused).
    logits: Vec<f64>,
    optimal: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SyntheticTreeMdp {
    pub fn generate(params: SyntheticParams) -> Result<Self, EnvError> {
        let b = params.branching;
        let d = params.depth;
        if b < 2 || d < 1 {
            return Err(EnvError::BadState(format!(
                "synthetic tree needs branching >= 2 and depth >= 1, got b={b} D={d}"
            )));
        }
        let mut level_start = vec![0usize];
        let mut width = 1usize;
        for _ in 0..=d {
            let last = *level_start.last().unwrap();
            level_start.push(last + width);
            width *= b;
        }
        let n = level_start[d + 1];
        let leaf_start = level_start[d];

        let mut quality_rng = rng::stream(params.seed, &[1]);
        let mut reward_rng = rng::stream(params.seed, &[2]);

        let mut path = vec![0.0f64; n];
        for i in 1..n {
            let q: f64 = quality_rng.sample(StandardNormal);
            path[i] = path[(i - 1) / b] + q;
        }
        let mut rewards = vec![0.0f64; n];
        let scale = (d as f64).sqrt();
        for i in leaf_start..n {
            let p = sigmoid(params.reward_sharpness * (path[i] / scale - params.reward_threshold));
            let u: f64 = reward_rng.random();
            rewards[i] = if u < p { 1.0 } else { 0.0 };
        }

        Ok(Self::assemble(params, level_start, rewards))
    }

    /// Builds an instance with the given leaf rewards (in level order) instead
    /// of sampled ones. Prior logits are drawn as in [`Self::generate`].
    pub fn with_leaf_rewards(params: SyntheticParams, leaf_rewards: &[f64]) -> Result<Self, EnvError> {
        let shape = Self::generate(params)?;
        let leaf_start = shape.level_start[params.depth];
        let n = shape.node_count();
        if leaf_rewards.len() != n - leaf_start {
            return Err(EnvError::BadState(format!(
                "expected {} leaf rewards, got {}",
                n - leaf_start,
                leaf_rewards.len()
            )));
        }
        let mut rewards = vec![0.0; n];
        rewards[leaf_start..].copy_from_slice(leaf_rewards);
        Ok(Self::assemble(params, shape.level_start, rewards))
    }

    fn assemble(params: SyntheticParams, level_start: Vec<usize>, rewards: Vec<f64>) -> Self {
        let n = rewards.len();
        let mut prior_rng = rng::stream(params.seed, &[3]);
        let mut mdp = Self {
            params,
            level_start,
            rewards,
            logits: vec![0.0; n],
            optimal: Vec::new(),
        };
        mdp.optimal = optimal_values(&mdp);
        for i in 1..n {
            let z: f64 = prior_rng.sample(StandardNormal);
            mdp.logits[i] = params.beta * mdp.optimal[i] + params.prior_noise * z;
        }
        mdp
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.rewards.len()
    }

    pub fn root(&self) -> SyntheticState {
        SyntheticState { index: 0, depth: 0 }
    }

    pub fn children(&self, index: usize) -> std::ops::Range<usize> {
        if self.depth_of(index) == self.params.depth {
            return 0..0;
        }
        let first = index * self.params.branching + 1;
        first..first + self.params.branching
    }

    pub fn depth_of(&self, index: usize) -> usize {
        self.level_start
            .iter()
            .rposition(|&start| start <= index)
            .expect("index in range")
    }

    pub fn is_leaf(&self, index: usize) -> bool {
        index >= self.level_start[self.params.depth]
    }

    pub fn leaf_reward(&self, index: usize) -> f64 {
        self.rewards[index]
    }

    pub fn logit(&self, index: usize) -> f64 {
        self.logits[index]
    }

    /// `V*` of a node.
    pub fn optimal_value(&self, index: usize) -> f64 {
        self.optimal[index]
    }

    pub fn optimal_table(&self) -> &[f64] {
        &self.optimal
    }

    /// `"root/3/1"`: the child indices along the path from the root.
    pub fn path_text(&self, mut index: usize) -> String {
        let b = self.params.branching;
        let mut digits = Vec::new();
        while index > 0 {
            digits.push((index - 1) % b);
            index = (index - 1) / b;
        }
        let mut s = String::from("root");
        for d in digits.iter().rev() {
            s.push('/');
            s.push_str(&d.to_string());
        }
        s
    }

    pub fn parse_state(&self, text: &str) -> Result<SyntheticState, EnvError> {
        let bad = || EnvError::BadState(text.to_string());
        let mut parts = text.split('/');
        if parts.next() != Some("root") {
            return Err(bad());
        }
        let mut state = self.root();
        for part in parts {
            let k: usize = part.parse().map_err(|_| bad())?;
            state = self.child(state, k).ok_or_else(bad)?;
        }
        Ok(state)
    }

    pub fn child(&self, state: SyntheticState, k: usize) -> Option<SyntheticState> {
        (k < self.params.branching && state.depth < self.params.depth).then(|| SyntheticState {
            index: state.index * self.params.branching + 1 + k,
            depth: state.depth + 1,
        })
    }

    /// Stable text form of the whole instance (for determinism checks).
    pub fn serialize(&self) -> String {
        let mut out = format!("{:?}\n", self.params);
        for i in 0..self.node_count() {
            out.push_str(&format!(
                "{i}\t{}\t{:e}\t{}\n",
                self.rewards[i], self.logits[i], self.optimal[i]
            ));
        }
        out
    }
}

/// Bottom-up DP max-backup: `V*(leaf) = reward`, `V*(node) = max_child V*`.
pub fn optimal_values(mdp: &SyntheticTreeMdp) -> Vec<f64> {
    let n = mdp.node_count();
    let mut v = vec![0.0f64; n];
    for i in (0..n).rev() {
        v[i] = if mdp.is_leaf(i) {
            mdp.rewards[i]
        } else {
            mdp.children(i).map(|c| v[c]).fold(f64::NEG_INFINITY, f64::max)
        };
    }
    v
}

impl Environment for SyntheticTreeMdp {
    type State = SyntheticState;

    fn canonical_text(&self, state: &SyntheticState) -> String {
        self.path_text(state.index)
    }

    fn is_terminal(&self, state: &SyntheticState) -> bool {
        state.depth == self.params.depth
    }

    fn reward(&self, state: &SyntheticState) -> f64 {
        self.rewards[state.index]
    }

    fn step(&self, state: &SyntheticState, action: &str) -> Result<SyntheticState, EnvError> {
        action
            .parse::<usize>()
            .ok()
            .and_then(|k| self.child(*state, k))
            .ok_or_else(|| EnvError::UnknownAction {
                state: self.path_text(state.index),
                action: action.to_string(),
            })
    }
}
