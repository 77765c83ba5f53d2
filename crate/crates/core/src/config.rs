use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Gumbel root sampling + Sequential Halving + completed-value policy.
    Rescale,
    /// Dirichlet root noise + PUCT + visit-count final selection.
    AlphaZero,
}

/// Value used for `Q(a)` of unvisited edges in PUCT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnvisitedQ {
    Zero,
    ValueEval,
    ParentMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PuctParams {
    pub c_puct: f64,
    pub dirichlet_epsilon: f64,
    pub dirichlet_alpha: f64,
    /// Temperature of the final visit-count sampling.
    pub temperature: f64,
    /// Temperatures at or below this are treated as greedy argmax.
    pub greedy_temperature: f64,
    pub unvisited_q: UnvisitedQ,
}

impl Default for PuctParams {
    fn default() -> Self {
        Self {
            c_puct: 1.25,
            dirichlet_epsilon: 0.25,
            dirichlet_alpha: 0.3,
            temperature: 1.0,
            greedy_temperature: 0.01,
            unvisited_q: UnvisitedQ::Zero,
        }
    }
}

impl PuctParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(
            self.c_puct.is_finite() && self.c_puct > 0.0,
            "c_puct must be finite and > 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.dirichlet_epsilon),
            "dirichlet_epsilon must lie in [0, 1]",
        )?;
        check(
            self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0,
            "dirichlet_alpha must be finite and > 0",
        )?;
        check(
            self.temperature.is_finite() && self.temperature > 0.0,
            "temperature must be finite and > 0",
        )?;
        check(
            self.greedy_temperature.is_finite() && self.greedy_temperature >= 0.0,
            "greedy_temperature must be finite and >= 0",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub num_simulations: u32,
    pub expansion_width: usize,
    pub root_top_m: usize,
    /// Maximum absolute depth of any node, counted from the episode start.
    pub max_depth: usize,
    pub c_visit: f64,
    pub c_scale: f64,
    pub algorithm: Algorithm,
    pub gumbel_enabled: bool,
    pub sequential_halving_enabled: bool,
    pub puct: PuctParams,
    pub rng_seed: u64,
    pub subtree_reuse: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            num_simulations: 24,
            expansion_width: 8,
            root_top_m: 8,
            max_depth: 4,
            c_visit: 50.0,
            c_scale: 1.0,
            algorithm: Algorithm::Rescale,
            gumbel_enabled: true,
            sequential_halving_enabled: true,
            puct: PuctParams::default(),
            rng_seed: 0,
            subtree_reuse: false,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid search config: {0}")]
pub struct ConfigError(pub String);

fn check(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg.to_string()))
    }
}

/// `⌈log₂ m⌉` for `m ≥ 1`.
pub fn ceil_log2(m: usize) -> u32 {
    assert!(m >= 1);
    usize::BITS - (m - 1).leading_zeros()
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.num_simulations >= 1, "num_simulations must be >= 1")?;
        check(self.expansion_width >= 1, "expansion_width must be >= 1")?;
        check(
            self.root_top_m >= 1 && self.root_top_m <= self.expansion_width,
            "root_top_m must satisfy 1 <= M <= expansion_width",
        )?;
        check(self.max_depth >= 1, "max_depth must be >= 1")?;
        check(self.c_visit.is_finite(), "c_visit must be finite")?;
        check(
            self.c_scale.is_finite() && self.c_scale > 0.0,
            "c_scale must be finite and > 0",
        )?;
        if self.algorithm == Algorithm::Rescale && self.sequential_halving_enabled {
            check(
                self.num_simulations >= ceil_log2(self.root_top_m),
                "num_simulations must be >= ceil(log2(root_top_m)) with sequential halving",
            )?;
        }
        self.puct.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}
