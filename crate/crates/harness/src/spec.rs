//! Declarative sweep specification (TOML) and budget presets.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rescale_core::env::SyntheticParams;
use rescale_core::{Algorithm, PuctParams, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// A search or sampling method. ReSCALE ablations are separate methods so a
/// single sweep can compare them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Rescale { gumbel: bool, halving: bool },
    AlphaZero,
    BestOfN,
}

impl Method {
    pub const RESCALE: Method = Method::Rescale {
        gumbel: true,
        halving: true,
    };

    pub fn without_gumbel(self) -> Self {
        match self {
            Method::Rescale { halving, .. } => Method::Rescale { gumbel: false, halving },
            m => m,
        }
    }

    pub fn without_halving(self) -> Self {
        match self {
            Method::Rescale { gumbel, .. } => Method::Rescale { gumbel, halving: false },
            m => m,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Rescale { gumbel, halving } => {
                f.write_str("rescale")?;
                if !gumbel {
                    f.write_str("-no-gumbel")?;
                }
                if !halving {
                    f.write_str("-no-halving")?;
                }
                Ok(())
            }
            Method::AlphaZero => f.write_str("alphazero"),
            Method::BestOfN => f.write_str("best-of-n"),
        }
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alphazero" => return Ok(Method::AlphaZero),
            "best-of-n" => return Ok(Method::BestOfN),
            _ => {}
        }
        let rest = s
            .strip_prefix("rescale")
            .ok_or_else(|| HarnessError::Spec(format!("unknown method {s:?}")))?;
        let mut m = Method::RESCALE;
        let mut rest = rest;
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix("-no-gumbel") {
                m = m.without_gumbel();
                rest = r;
            } else if let Some(r) = rest.strip_prefix("-no-halving") {
                m = m.without_halving();
                rest = r;
            } else {
                return Err(HarnessError::Spec(format!("unknown method {s:?}")));
            }
        }
        Ok(m)
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `oracle`, `noisy:SIGMA` or `remote:URL`.
#[derive(Debug, Clone, PartialEq)]
pub enum EvaluatorSpec {
    Oracle,
    Noisy { sigma: f64 },
    Remote { url: String },
}

impl fmt::Display for EvaluatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluatorSpec::Oracle => f.write_str("oracle"),
            EvaluatorSpec::Noisy { sigma } => write!(f, "noisy:{sigma}"),
            EvaluatorSpec::Remote { url } => write!(f, "remote:{url}"),
        }
    }
}

impl FromStr for EvaluatorSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" {
            return Ok(EvaluatorSpec::Oracle);
        }
        if let Some(sigma) = s.strip_prefix("noisy:") {
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| HarnessError::Spec(format!("bad noise level in {s:?}")))?;
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(HarnessError::Spec(format!("noise level must be >= 0 in {s:?}")));
            }
            return Ok(EvaluatorSpec::Noisy { sigma });
        }
        if let Some(url) = s.strip_prefix("remote:") {
            return Ok(EvaluatorSpec::Remote { url: url.to_string() });
        }
        Err(HarnessError::Spec(format!(
            "unknown evaluator {s:?} (expected oracle, noisy:SIGMA or remote:URL)"
        )))
    }
}

impl Serialize for EvaluatorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EvaluatorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Game24,
    Synthetic,
}

impl FromStr for EnvKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "game24" => Ok(EnvKind::Game24),
            "synthetic" => Ok(EnvKind::Synthetic),
            _ => Err(HarnessError::Spec(format!("unknown env {s:?}"))),
        }
    }
}

/// What counts as a correct outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Decode a full episode; correct iff the final reward is 1.
    Episode,
    /// One search at the initial state; correct iff the chosen child keeps
    /// the optimal value of the root.
    RootDecision,
}

impl FromStr for Scope {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "episode" => Ok(Scope::Episode),
            "root-decision" => Ok(Scope::RootDecision),
            _ => Err(HarnessError::Spec(format!("unknown scope {s:?}"))),
        }
    }
}

/// One budget level: `(N, w, M, d)` plus a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub label: String,
    pub sims: u32,
    pub width: usize,
    pub top_m: usize,
    pub depth: usize,
}

impl GridPoint {
    pub fn new(label: &str, sims: u32, width: usize, top_m: usize, depth: usize) -> Self {
        Self {
            label: label.to_string(),
            sims,
            width,
            top_m,
            depth,
        }
    }
}

/// Budget presets per environment, plus the wide/deep ablation point.
pub fn preset(env: EnvKind, label: &str) -> Result<GridPoint, HarnessError> {
    Ok(match (env, label) {
        (EnvKind::Synthetic, "small") => GridPoint::new("small", 8, 8, 8, 4),
        (EnvKind::Synthetic, "medium") => GridPoint::new("medium", 24, 8, 8, 4),
        (EnvKind::Synthetic, "large") => GridPoint::new("large", 64, 8, 8, 4),
        (EnvKind::Game24, "small") => GridPoint::new("small", 8, 12, 8, 4),
        (EnvKind::Game24, "medium") => GridPoint::new("medium", 16, 12, 8, 4),
        (EnvKind::Game24, "large") => GridPoint::new("large", 50, 12, 8, 4),
        (_, "ablation") => GridPoint::new("ablation", 50, 24, 16, 16),
        _ => return Err(HarnessError::Spec(format!("unknown budget preset {label:?}"))),
    })
}

pub fn default_grid(env: EnvKind) -> Vec<GridPoint> {
    ["small", "medium", "large"]
        .iter()
        .map(|l| preset(env, l).expect("built-in preset"))
        .collect()
}

/// Search constants shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    pub c_visit: f64,
    pub c_scale: f64,
    pub subtree_reuse: bool,
    pub puct: PuctParams,
}

impl Default for SearchOptions {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            c_visit: d.c_visit,
            c_scale: d.c_scale,
            subtree_reuse: d.subtree_reuse,
            puct: d.puct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Game24Options {
    /// Problem file, one instance per line.
    pub problems: PathBuf,
    pub beta: f64,
    pub prior_noise: f64,
    pub prior_seed: u64,
}

impl Default for Game24Options {
    fn default() -> Self {
        Self {
            problems: PathBuf::from("fixtures/game24_100.txt"),
            beta: 4.0,
            prior_noise: 0.5,
            prior_seed: 0,
        }
    }
}

/// Everything a sweep needs; every grid point, seed and problem is fully
/// determined by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub methods: Vec<Method>,
    pub grid: Vec<GridPoint>,
    pub seeds: Vec<u64>,
    pub env: EnvKind,
    pub evaluator: EvaluatorSpec,
    pub scope: Scope,
    /// Number of problems; synthetic instances are generated with tree seeds
    /// `synthetic.seed + id`, Game24 problems are the first lines of the file.
    pub problems: Option<usize>,
    pub synthetic: SyntheticParams,
    pub game24: Game24Options,
    pub search: SearchOptions,
    pub out: PathBuf,
    pub workers: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            methods: vec![Method::RESCALE, Method::AlphaZero],
            grid: default_grid(EnvKind::Synthetic),
            seeds: vec![0, 1, 2],
            env: EnvKind::Synthetic,
            evaluator: EvaluatorSpec::Oracle,
            scope: Scope::Episode,
            problems: None,
            synthetic: SyntheticParams::default(),
            game24: Game24Options::default(),
            search: SearchOptions::default(),
            out: PathBuf::from("sweep.csv"),
            workers: 1,
        }
    }
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec is always serializable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() || self.grid.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::Spec("methods, grid and seeds must be non-empty".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::Spec("workers must be >= 1".into()));
        }
        for m in &self.methods {
            for g in &self.grid {
                self.search_config(*m, g, 0)
                    .validate()
                    .map_err(|e| HarnessError::Spec(format!("{m} at {}: {e}", g.label)))?;
            }
        }
        Ok(())
    }

    /// Search configuration for one `(method, grid point)` with the given
    /// run seed. Best-of-N reuses the grid's width and depth.
    pub fn search_config(&self, method: Method, g: &GridPoint, rng_seed: u64) -> SearchConfig {
        let (algorithm, gumbel, halving) = match method {
            Method::Rescale { gumbel, halving } => (Algorithm::Rescale, gumbel, halving),
            Method::AlphaZero | Method::BestOfN => (Algorithm::AlphaZero, true, true),
        };
        SearchConfig {
            num_simulations: g.sims,
            expansion_width: g.width,
            root_top_m: g.top_m.min(g.width),
            max_depth: g.depth,
            c_visit: self.search.c_visit,
            c_scale: self.search.c_scale,
            algorithm,
            gumbel_enabled: gumbel,
            sequential_halving_enabled: halving,
            puct: self.search.puct,
            rng_seed,
            subtree_reuse: self.search.subtree_reuse,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for name in [
            "rescale",
            "rescale-no-gumbel",
            "rescale-no-halving",
            "rescale-no-gumbel-no-halving",
            "alphazero",
            "best-of-n",
        ] {
            assert_eq!(name.parse::<Method>().unwrap().to_string(), name);
        }
        assert!("rescale-fast".parse::<Method>().is_err());
        assert!("puct".parse::<Method>().is_err());
    }

    #[test]
    fn evaluator_specs() {
        assert_eq!("oracle".parse::<EvaluatorSpec>().unwrap(), EvaluatorSpec::Oracle);
        assert_eq!(
            "noisy:0.2".parse::<EvaluatorSpec>().unwrap(),
            EvaluatorSpec::Noisy { sigma: 0.2 }
        );
        assert_eq!(
            "remote:http://127.0.0.1:8000".parse::<EvaluatorSpec>().unwrap(),
            EvaluatorSpec::Remote {
                url: "http://127.0.0.1:8000".into()
            }
        );
        assert!("noisy:-1".parse::<EvaluatorSpec>().is_err());
        assert!("noisy:x".parse::<EvaluatorSpec>().is_err());
        assert!("llm".parse::<EvaluatorSpec>().is_err());
    }

    #[test]
    fn presets() {
        let g = default_grid(EnvKind::Synthetic);
        assert_eq!(g.iter().map(|g| g.sims).collect::<Vec<_>>(), vec![8, 24, 64]);
        assert!(g.iter().all(|g| g.width == 8 && g.top_m == 8 && g.depth == 4));
        let g = default_grid(EnvKind::Game24);
        assert_eq!(g.iter().map(|g| g.sims).collect::<Vec<_>>(), vec![8, 16, 50]);
        assert!(g.iter().all(|g| g.width == 12 && g.top_m == 8 && g.depth == 4));
        let a = preset(EnvKind::Synthetic, "ablation").unwrap();
        assert_eq!((a.sims, a.width, a.depth), (50, 24, 16));
    }

    #[test]
    fn toml_round_trip() {
        let spec = SweepSpec {
            methods: vec![Method::RESCALE, Method::BestOfN],
            evaluator: EvaluatorSpec::Noisy { sigma: 0.2 },
            scope: Scope::RootDecision,
            problems: Some(10),
            ..SweepSpec::default()
        };
        let text = spec.to_toml();
        assert_eq!(SweepSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn toml_minimal_and_errors() {
        let spec = SweepSpec::from_toml(
            r#"
            methods = ["rescale-no-halving"]
            seeds = [7]
            env = "game24"
            evaluator = "noisy:0.1"

            [[grid]]
            label = "tiny"
            sims = 4
            width = 4
            top_m = 2
            depth = 4
            "#,
        )
        .unwrap();
        assert_eq!(spec.methods, vec![Method::RESCALE.without_halving()]);
        assert_eq!(spec.grid.len(), 1);
        assert!(SweepSpec::from_toml("bogus = 1").is_err());
        assert!(SweepSpec::from_toml("workers = 0").is_err());
    }
}
