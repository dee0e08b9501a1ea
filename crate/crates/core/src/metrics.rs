//! Exposure, impact, opportunity (TPR) and utility over a set of rankings.
//!
//! The `_weighted` variants treat each ranking as a user group of size
//! `weights[u]` and normalise by `sum(weights)` instead of the user count.

use crate::error::{invalid, Error, Result};
use crate::types::{GroupPartition, PositionWeights, RankedList, RelevanceMatrix};

/// Position-weighted exposure of one user to items of group `j`.
pub fn user_exposure(
    ranking: &RankedList,
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    groups.check_group(j)?;
    ranking.check_against(groups.n_items(), pi)?;
    Ok(ranking
        .items()
        .iter()
        .enumerate()
        .filter(|(_, &i)| groups.contains(j, i))
        .map(|(k, _)| pi.get(k))
        .sum())
}

pub fn group_exposure(
    rankings: &[RankedList],
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    group_exposure_weighted(rankings, &unit_weights(rankings.len()), groups, pi, j)
}

/// Exposure of group `j` averaged over users: `(1/W) sum_u w_u Exposure(u, G_j)`.
pub fn group_exposure_weighted(
    rankings: &[RankedList],
    weights: &[f64],
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    let total = check_population(rankings, weights)?;
    let mut acc = 0.0;
    for (ranking, &w) in rankings.iter().zip(weights) {
        acc += w * user_exposure(ranking, groups, pi, j)?;
    }
    Ok(acc / total)
}

pub fn group_impact(
    rankings: &[RankedList],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    group_impact_weighted(rankings, &unit_weights(rankings.len()), relevance, groups, pi, j)
}

/// Exposure of group `j` weighted by the relevance of each shown item.
pub fn group_impact_weighted(
    rankings: &[RankedList],
    weights: &[f64],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    let total = check_population(rankings, weights)?;
    check_relevance(rankings, relevance, groups)?;
    groups.check_group(j)?;
    let mut acc = 0.0;
    for (u, (ranking, &w)) in rankings.iter().zip(weights).enumerate() {
        ranking.check_against(groups.n_items(), pi)?;
        let user: f64 = ranking
            .items()
            .iter()
            .enumerate()
            .filter(|(_, &i)| groups.contains(j, i))
            .map(|(k, &i)| pi.get(k) * relevance.get(u, i))
            .sum();
        acc += w * user;
    }
    Ok(acc / total)
}

pub fn group_tpr(
    rankings: &[RankedList],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    group_tpr_weighted(rankings, &unit_weights(rankings.len()), relevance, groups, pi, j)
}

/// True positive rate of group `j`: delivered exposure over relevance mass.
///
/// Fails with [`Error::DegenerateGroup`] when the group carries no relevance
/// (including the empty group).
pub fn group_tpr_weighted(
    rankings: &[RankedList],
    weights: &[f64],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    j: usize,
) -> Result<f64> {
    check_population(rankings, weights)?;
    check_relevance(rankings, relevance, groups)?;
    groups.check_group(j)?;
    let denom = relevance_mass(relevance, weights, groups, j);
    if denom <= 0.0 {
        return Err(Error::DegenerateGroup { group: j });
    }
    let mut numer = 0.0;
    for (ranking, &w) in rankings.iter().zip(weights) {
        numer += w * user_exposure(ranking, groups, pi, j)?;
    }
    Ok(numer / denom)
}

/// `sum_u w_u sum_{i in G_j} r[u, i]`, the opportunity denominator.
pub fn relevance_mass(
    relevance: &RelevanceMatrix,
    weights: &[f64],
    groups: &GroupPartition,
    j: usize,
) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(u, &w)| w * groups.members(j).map(|i| relevance.get(u, i)).sum::<f64>())
        .sum()
}

pub fn aggregate_utility(
    rankings: &[RankedList],
    relevance: &RelevanceMatrix,
    pi: &PositionWeights,
) -> Result<f64> {
    aggregate_utility_weighted(rankings, &unit_weights(rankings.len()), relevance, pi)
}

/// `sum_u w_u sum_k r[u, R_u[k]] pi[k]`.
pub fn aggregate_utility_weighted(
    rankings: &[RankedList],
    weights: &[f64],
    relevance: &RelevanceMatrix,
    pi: &PositionWeights,
) -> Result<f64> {
    check_population(rankings, weights)?;
    if rankings.len() != relevance.n_users() {
        return invalid(format!(
            "{} rankings for {} users",
            rankings.len(),
            relevance.n_users()
        ));
    }
    let mut acc = 0.0;
    for (u, (ranking, &w)) in rankings.iter().zip(weights).enumerate() {
        ranking.check_against(relevance.n_items(), pi)?;
        let user: f64 = ranking
            .items()
            .iter()
            .enumerate()
            .map(|(k, &i)| relevance.get(u, i) * pi.get(k))
            .sum();
        acc += w * user;
    }
    Ok(acc)
}

pub(crate) fn unit_weights(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

fn check_population(rankings: &[RankedList], weights: &[f64]) -> Result<f64> {
    if rankings.is_empty() {
        return invalid("empty user set");
    }
    if weights.len() != rankings.len() {
        return invalid(format!(
            "{} weights for {} users",
            weights.len(),
            rankings.len()
        ));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return invalid("user weights must be positive and finite");
    }
    let len = rankings[0].len();
    if rankings.iter().any(|r| r.len() != len) {
        return invalid("rankings have differing lengths");
    }
    Ok(weights.iter().sum())
}

fn check_relevance(
    rankings: &[RankedList],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
) -> Result<()> {
    if rankings.len() != relevance.n_users() {
        return invalid(format!(
            "{} rankings for {} users",
            rankings.len(),
            relevance.n_users()
        ));
    }
    if groups.n_items() != relevance.n_items() {
        return invalid(format!(
            "partition covers {} items, relevance has {}",
            groups.n_items(),
            relevance.n_items()
        ));
    }
    Ok(())
}
