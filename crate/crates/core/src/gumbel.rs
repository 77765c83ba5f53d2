//! Gumbel root sampling, Sequential Halving, completed values and the
//! improved policy.
//!
//! Everything here is a pure function of per-child statistics
//! ([`ArmStats`]) plus, for root sampling, an RNG. Ties are broken
//! everywhere by (score, then prior, then lower action index).

use std::cmp::Ordering;

use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::config::ceil_log2;
use crate::search::ArmStats;

/// Floor applied to priors before taking logs.
pub const PRIOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SelectError {
    #[error("no candidate actions")]
    Empty,
    #[error("top-m of {m} requested from {available} candidates")]
    BadTopM { m: usize, available: usize },
    #[error("alive candidate {0} has no visits at elimination time")]
    UnvisitedSurvivor(usize),
    #[error("expected exactly one surviving candidate, found {0}")]
    SurvivorCount(usize),
    #[error("no visited root child to select from")]
    NothingVisited,
}

pub fn safe_log(p: f64) -> f64 {
    p.max(PRIOR_FLOOR).ln()
}

/// Inverse-CDF Gumbel(0, 1): `-ln(-ln u)`.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// One standard Gumbel variate. `u` is kept strictly inside (0, 1).
pub fn sample_gumbel(rng: &mut dyn RngCore) -> f64 {
    let u: f64 = rng.random();
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    gumbel_from_uniform(u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootCandidate {
    pub action_index: usize,
    /// Drawn once at search start; never resampled.
    pub gumbel: f64,
    pub log_prior: f64,
    pub alive: bool,
    /// Halving round (0-based) in which the candidate was dropped.
    pub eliminated_in_round: Option<usize>,
}

impl RootCandidate {
    /// `f = g + log p`.
    pub fn score(&self) -> f64 {
        self.gumbel + self.log_prior
    }
}

fn rank(a_score: f64, a_prior: f64, a_idx: usize, b_score: f64, b_prior: f64, b_idx: usize) -> Ordering {
    // descending score, descending prior, ascending index
    b_score
        .total_cmp(&a_score)
        .then(b_prior.total_cmp(&a_prior))
        .then(a_idx.cmp(&b_idx))
}

/// Draws one Gumbel per candidate, sorts by `f = g + log p` (descending) and
/// marks the first `m` alive. With `gumbel_enabled = false`, `g ≡ 0`.
pub fn gumbel_top_m(
    log_priors: &[f64],
    m: usize,
    gumbel_enabled: bool,
    rng: &mut dyn RngCore,
) -> Result<Vec<RootCandidate>, SelectError> {
    if log_priors.is_empty() {
        return Err(SelectError::Empty);
    }
    if m == 0 || m > log_priors.len() {
        return Err(SelectError::BadTopM {
            m,
            available: log_priors.len(),
        });
    }
    let mut cands: Vec<RootCandidate> = log_priors
        .iter()
        .enumerate()
        .map(|(i, &lp)| RootCandidate {
            action_index: i,
            gumbel: if gumbel_enabled { sample_gumbel(rng) } else { 0.0 },
            log_prior: lp,
            alive: false,
            eliminated_in_round: None,
        })
        .collect();
    cands.sort_by(|a, b| {
        rank(
            a.score(),
            a.log_prior,
            a.action_index,
            b.score(),
            b.log_prior,
            b.action_index,
        )
    });
    for c in cands.iter_mut().take(m) {
        c.alive = true;
    }
    Ok(cands)
}

/// `σ(v) = c_scale · (c_visit + max_a N(a)) · v`.
pub fn sigma(v: f64, max_visits: u32, c_visit: f64, c_scale: f64) -> f64 {
    c_scale * (c_visit + max_visits as f64) * v
}

pub fn max_visits(arms: &[ArmStats]) -> u32 {
    arms.iter().map(|a| a.visits).max().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HalvingRound {
    pub survivors: usize,
    pub sims_per_survivor: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HalvingSchedule {
    pub rounds: Vec<HalvingRound>,
    /// Leftover budget, dealt to the final round.
    pub extra_final_sims: u32,
}

impl HalvingSchedule {
    pub fn total(&self) -> u32 {
        self.rounds
            .iter()
            .map(|r| r.survivors as u32 * r.sims_per_survivor)
            .sum::<u32>()
            + self.extra_final_sims
    }

    /// Whether every survivor of every round gets at least one simulation.
    pub fn visits_every_survivor(&self) -> bool {
        self.rounds.iter().all(|r| r.sims_per_survivor >= 1)
    }
}

/// Sequential Halving budget split for `m` arms and `n` simulations.
///
/// `r = ⌈log₂ m⌉` rounds (one round for `m = 1`); round `k` has `s_k` arms
/// (`s_1 = m`, `s_{k+1} = ⌈s_k / 2⌉`) and gives each `⌊⌊n / r⌋ / s_k⌋`
/// simulations. Whatever is left of `n` goes to the final round.
pub fn halving_schedule(m: usize, n: u32) -> HalvingSchedule {
    assert!(m >= 1 && n >= 1, "halving_schedule needs m >= 1 and n >= 1");
    if m == 1 {
        return HalvingSchedule {
            rounds: vec![HalvingRound {
                survivors: 1,
                sims_per_survivor: n,
            }],
            extra_final_sims: 0,
        };
    }
    let r = ceil_log2(m);
    let per_round = n / r;
    let mut rounds = Vec::with_capacity(r as usize);
    let mut survivors = m;
    for _ in 0..r {
        rounds.push(HalvingRound {
            survivors,
            sims_per_survivor: per_round / survivors as u32,
        });
        survivors = survivors.div_ceil(2);
    }
    let used: u32 = rounds.iter().map(|r| r.survivors as u32 * r.sims_per_survivor).sum();
    HalvingSchedule {
        rounds,
        extra_final_sims: n - used,
    }
}

/// Largest `m ≤ m_cap` whose schedule for `n` visits every survivor in every
/// round. Always at least 1.
pub fn effective_top_m(m_cap: usize, n: u32) -> usize {
    (1..=m_cap.max(1))
        .rev()
        .find(|&m| halving_schedule(m, n).visits_every_survivor())
        .unwrap_or(1)
}

/// Updated root score `f + σ(v)` of a candidate.
pub fn updated_score(c: &RootCandidate, arm: &ArmStats, max_root_visits: u32, c_visit: f64, c_scale: f64) -> f64 {
    c.score() + sigma(arm.mean_value, max_root_visits, c_visit, c_scale)
}

/// Indices into `candidates` of the alive ones, best first by updated score.
pub fn ranked_alive(candidates: &[RootCandidate], arms: &[ArmStats], c_visit: f64, c_scale: f64) -> Vec<usize> {
    let max_n = max_visits(arms);
    let mut alive: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.alive)
        .map(|(i, c)| (i, updated_score(c, &arms[c.action_index], max_n, c_visit, c_scale)))
        .collect();
    alive.sort_by(|&(i, si), &(j, sj)| {
        let (a, b) = (&candidates[i], &candidates[j]);
        rank(
            si,
            arms[a.action_index].prior,
            a.action_index,
            sj,
            arms[b.action_index].prior,
            b.action_index,
        )
    });
    alive.into_iter().map(|(i, _)| i).collect()
}

/// End-of-round elimination: re-score alive candidates by `f + σ(v)` and drop
/// the bottom `⌊alive / 2⌋`. `σ` uses the maximum visit count over all root
/// children.
pub fn halving_eliminate(
    candidates: &mut [RootCandidate],
    arms: &[ArmStats],
    c_visit: f64,
    c_scale: f64,
    round: usize,
) -> Result<(), SelectError> {
    if let Some(c) = candidates.iter().find(|c| c.alive && arms[c.action_index].visits == 0) {
        return Err(SelectError::UnvisitedSurvivor(c.action_index));
    }
    let ranked = ranked_alive(candidates, arms, c_visit, c_scale);
    let drop = ranked.len() / 2;
    for &i in ranked.iter().rev().take(drop) {
        candidates[i].alive = false;
        candidates[i].eliminated_in_round = Some(round);
    }
    Ok(())
}

/// Completed values: the backed-up mean for visited children, and
/// `v_mix = (v_φ + N_Σ · v̄) / (1 + N_Σ)` for unvisited ones, where `v̄` is the
/// prior-weighted mean over visited siblings.
pub fn completed_values(arms: &[ArmStats]) -> Vec<f64> {
    let total: u32 = arms.iter().map(|a| a.visits).sum();
    if total == 0 {
        return arms.iter().map(|a| a.value_eval).collect();
    }
    let (num, den) = arms
        .iter()
        .filter(|a| a.visits > 0)
        .fold((0.0, 0.0), |(n, d), a| (n + a.prior * a.mean_value, d + a.prior));
    let baseline = if den > 0.0 { num / den } else { 0.0 };
    let total = total as f64;
    arms.iter()
        .map(|a| {
            if a.visits > 0 {
                a.mean_value
            } else {
                (a.value_eval + total * baseline) / (1.0 + total)
            }
        })
        .collect()
}

/// `π′ = softmax(log p + σ(v_c))`, computed with max-subtraction.
pub fn improved_policy(log_priors: &[f64], completed: &[f64], max_visits: u32, c_visit: f64, c_scale: f64) -> Vec<f64> {
    assert_eq!(log_priors.len(), completed.len());
    let logits: Vec<f64> = log_priors
        .iter()
        .zip(completed)
        .map(|(lp, v)| lp + sigma(*v, max_visits, c_visit, c_scale))
        .collect();
    softmax(&logits)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `argmax_a π′(a) − N(a) / (1 + Σ_b N(b))`; ties by higher `π′`, then lower index.
pub fn select_by_improved_policy(pi: &[f64], visits: &[u32]) -> usize {
    assert!(!pi.is_empty() && pi.len() == visits.len());
    let total: u32 = visits.iter().sum();
    let denom = 1.0 + total as f64;
    (0..pi.len())
        .min_by(|&a, &b| {
            let sa = pi[a] - visits[a] as f64 / denom;
            let sb = pi[b] - visits[b] as f64 / denom;
            rank(sa, pi[a], a, sb, pi[b], b)
        })
        .unwrap()
}

/// Deterministic in-tree selection below the root.
pub fn select_nonroot_action(arms: &[ArmStats], c_visit: f64, c_scale: f64) -> usize {
    let log_priors: Vec<f64> = arms.iter().map(|a| safe_log(a.prior)).collect();
    let completed = completed_values(arms);
    let pi = improved_policy(&log_priors, &completed, max_visits(arms), c_visit, c_scale);
    let visits: Vec<u32> = arms.iter().map(|a| a.visits).collect();
    select_by_improved_policy(&pi, &visits)
}

/// Final root decision. With halving the unique survivor; without it, the
/// visited child with the largest `f + σ(v)`.
pub fn select_final_root_action(
    candidates: &[RootCandidate],
    arms: &[ArmStats],
    halving_enabled: bool,
    c_visit: f64,
    c_scale: f64,
) -> Result<usize, SelectError> {
    if halving_enabled {
        let alive: Vec<&RootCandidate> = candidates.iter().filter(|c| c.alive).collect();
        return match alive.as_slice() {
            [only] => Ok(only.action_index),
            other => Err(SelectError::SurvivorCount(other.len())),
        };
    }
    let max_n = max_visits(arms);
    candidates
        .iter()
        .filter(|c| arms[c.action_index].visits > 0)
        .map(|c| (c, updated_score(c, &arms[c.action_index], max_n, c_visit, c_scale)))
        .min_by(|(a, sa), (b, sb)| {
            rank(
                *sa,
                arms[a.action_index].prior,
                a.action_index,
                *sb,
                arms[b.action_index].prior,
                b.action_index,
            )
        })
        .map(|(c, _)| c.action_index)
        .ok_or(SelectError::NothingVisited)
}
