//! AlphaZero baseline: Dirichlet root noise, PUCT selection and visit-count
//! final action sampling.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};

use crate::config::{PuctParams, UnvisitedQ};
use crate::gumbel::SelectError;
use crate::search::ArmStats;

/// `p′ = (1 − ε) p + ε η` with `η ~ Dirichlet(α, …, α)`.
pub fn apply_dirichlet_noise(priors: &[f64], params: &PuctParams, rng: &mut dyn RngCore) -> Vec<f64> {
    let eps = params.dirichlet_epsilon;
    if eps == 0.0 || priors.len() < 2 {
        return priors.to_vec();
    }
    let gamma = Gamma::new(params.dirichlet_alpha, 1.0).expect("alpha validated > 0");
    let mut eta: Vec<f64> = (0..priors.len()).map(|_| gamma.sample(rng)).collect();
    let total: f64 = eta.iter().sum();
    if total > 0.0 && total.is_finite() {
        eta.iter_mut().for_each(|x| *x /= total);
    } else {
        // every draw underflowed; fall back to the Dirichlet mean
        eta.iter_mut().for_each(|x| *x = 1.0 / priors.len() as f64);
    }
    let mixed: Vec<f64> = priors
        .iter()
        .zip(&eta)
        .map(|(p, n)| (1.0 - eps) * p + eps * n)
        .collect();
    let total: f64 = mixed.iter().sum();
    mixed.into_iter().map(|x| x / total).collect()
}

fn unvisited_q(arms: &[ArmStats], arm: &ArmStats, rule: UnvisitedQ) -> f64 {
    match rule {
        UnvisitedQ::Zero => 0.0,
        UnvisitedQ::ValueEval => arm.value_eval,
        UnvisitedQ::ParentMean => {
            let (num, den) = arms.iter().filter(|a| a.visits > 0).fold((0.0, 0.0), |(n, d), a| {
                (n + a.visits as f64 * a.mean_value, d + a.visits as f64)
            });
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        }
    }
}

/// PUCT score of every arm.
pub fn puct_scores(arms: &[ArmStats], params: &PuctParams) -> Vec<f64> {
    let total: u32 = arms.iter().map(|a| a.visits).sum();
    let sqrt_total = (total as f64).sqrt();
    arms.iter()
        .map(|a| {
            let q = if a.visits > 0 {
                a.mean_value
            } else {
                unvisited_q(arms, a, params.unvisited_q)
            };
            q + params.c_puct * a.prior * sqrt_total / (1.0 + a.visits as f64)
        })
        .collect()
}

/// `argmax_a Q(a) + c · p(a) · sqrt(Σ N) / (1 + N(a))`; ties by higher prior,
/// then lower index.
pub fn puct_select(arms: &[ArmStats], params: &PuctParams) -> usize {
    assert!(!arms.is_empty(), "puct_select on a childless node");
    let scores = puct_scores(arms, params);
    (0..arms.len())
        .min_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(arms[b].prior.total_cmp(&arms[a].prior))
                .then(a.cmp(&b))
        })
        .unwrap()
}

/// Distribution `N(a)^{1/τ} / Σ_b N(b)^{1/τ}`, evaluated in log space.
pub fn visit_distribution(visits: &[u32], tau: f64) -> Vec<f64> {
    let max = visits.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0.0; visits.len()];
    }
    let ln_max = (max as f64).ln();
    let w: Vec<f64> = visits
        .iter()
        .map(|&n| {
            if n == 0 {
                0.0
            } else {
                (((n as f64).ln() - ln_max) / tau).exp()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Final baseline decision: sample from the exponentiated visit counts, or
/// take the most visited arm when `tau <= greedy_tau`.
pub fn visit_count_action(
    arms: &[ArmStats],
    tau: f64,
    greedy_tau: f64,
    rng: &mut dyn RngCore,
) -> Result<usize, SelectError> {
    let visits: Vec<u32> = arms.iter().map(|a| a.visits).collect();
    if visits.iter().all(|&n| n == 0) {
        return Err(SelectError::NothingVisited);
    }
    if tau <= greedy_tau {
        return Ok((0..arms.len())
            .min_by(|&a, &b| {
                visits[b]
                    .cmp(&visits[a])
                    .then(arms[b].prior.total_cmp(&arms[a].prior))
                    .then(a.cmp(&b))
            })
            .unwrap());
    }
    let dist = visit_distribution(&visits, tau);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in dist.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
            acc += p;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_nonzero)
}
