//! Fairness-constrained ranking over the Birkhoff polytope.
//!
//! Each user's ranking is relaxed to a doubly stochastic matrix `Sigma_u`
//! (positions by items). Utility and every group constraint are linear in the
//! stacked entries, so the whole problem is one LP. The optimum is decomposed
//! into permutations and one ranking per user is sampled from the mixture.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::bvn::{bvn_decompose, sample_ranking, BirkhoffDecomposition, SUPPORT_TOL};
use super::lp::{LinearProgram, LpSolver, LpStatus, DenseSimplex, TOL_LP};
use crate::error::{invalid, Error, Result};
use crate::metrics::relevance_mass;
use crate::random::RandomSource;
use crate::types::{GroupPartition, PositionWeights, RankedList, RelevanceMatrix, StochasticRankingPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `Exposure(G_j) >= eps_j`
    ExposureFloor,
    /// `Impact(G_j) >= eps_j`
    ImpactFloor,
    /// `TPR(G_j) >= eps_j`
    OpportunityFloor,
    /// `Exposure(G_j)` equal across groups; epsilon unused.
    ExposureEqual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessConstraint {
    pub kind: ConstraintKind,
    pub epsilon: Vec<f64>,
}

impl FairnessConstraint {
    pub fn new(kind: ConstraintKind, epsilon: Vec<f64>) -> Result<Self> {
        if epsilon.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return invalid("epsilon must be finite and non-negative");
        }
        Ok(Self { kind, epsilon })
    }

    /// Exposure floor of zero for every group, i.e. no constraint.
    pub fn none(m: usize) -> Self {
        Self {
            kind: ConstraintKind::ExposureFloor,
            epsilon: vec![0.0; m],
        }
    }

    pub fn uniform(kind: ConstraintKind, m: usize, epsilon: f64) -> Result<Self> {
        Self::new(kind, vec![epsilon; m])
    }

    fn check(&self, m: usize) -> Result<()> {
        if self.kind != ConstraintKind::ExposureEqual && self.epsilon.len() != m {
            return invalid(format!("{} epsilon values for {m} groups", self.epsilon.len()));
        }
        Ok(())
    }
}

/// Variable index of `Sigma_u[k][i]` in the stacked LP.
pub fn var_index(n: usize, user: usize, position: usize, item: usize) -> usize {
    user * n * n + position * n + item
}

/// Coefficients of the group quantity constrained by `kind` (exposure,
/// impact or TPR) over the stacked variables. `ExposureEqual` uses exposure.
fn group_coefficients(
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    kind: ConstraintKind,
    weights: &[f64],
    j: usize,
) -> Result<Vec<f64>> {
    let (users, n) = (relevance.n_users(), relevance.n_items());
    let total: f64 = weights.iter().sum();
    let norm = match kind {
        ConstraintKind::OpportunityFloor => {
            let d = relevance_mass(relevance, weights, groups, j);
            if d <= 0.0 {
                return Err(Error::DegenerateGroup { group: j });
            }
            d
        }
        _ => total,
    };
    let mut coeffs = vec![0.0; users * n * n];
    for (u, &w) in weights.iter().enumerate() {
        for k in 0..n {
            for i in groups.members(j) {
                let mut c = w * pi.get(k) / norm;
                if kind == ConstraintKind::ImpactFloor {
                    c *= relevance.get(u, i);
                }
                coeffs[var_index(n, u, k, i)] = c;
            }
        }
    }
    Ok(coeffs)
}

fn check_inputs(
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    constraint: &FairnessConstraint,
    weights: &[f64],
) -> Result<()> {
    let n = relevance.n_items();
    if pi.len() != n {
        return invalid(format!("{} position weights for {n} items", pi.len()));
    }
    if groups.n_items() != n {
        return invalid(format!("partition covers {} items, relevance has {n}", groups.n_items()));
    }
    if weights.len() != relevance.n_users() {
        return invalid(format!("{} weights for {} users", weights.len(), relevance.n_users()));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return invalid("user weights must be positive and finite");
    }
    constraint.check(groups.n_groups())
}

/// Builds the stacked Birkhoff-polytope LP for all users.
pub fn assemble_ranking_lp(
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    constraint: &FairnessConstraint,
    user_weights: &[f64],
) -> Result<LinearProgram> {
    check_inputs(relevance, groups, pi, constraint, user_weights)?;
    let (users, n) = (relevance.n_users(), relevance.n_items());
    let vars = users * n * n;

    let mut objective = vec![0.0; vars];
    for (u, &w) in user_weights.iter().enumerate() {
        for k in 0..n {
            for i in 0..n {
                objective[var_index(n, u, k, i)] = w * pi.get(k) * relevance.get(u, i);
            }
        }
    }
    let mut lp = LinearProgram::maximize(objective);

    for u in 0..users {
        for k in 0..n {
            let mut row = vec![0.0; vars];
            (0..n).for_each(|i| row[var_index(n, u, k, i)] = 1.0);
            lp.add_eq(row, 1.0);
        }
        for i in 0..n {
            let mut row = vec![0.0; vars];
            (0..n).for_each(|k| row[var_index(n, u, k, i)] = 1.0);
            lp.add_eq(row, 1.0);
        }
    }

    let m = groups.n_groups();
    match constraint.kind {
        ConstraintKind::ExposureEqual => {
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|j| group_coefficients(relevance, groups, pi, constraint.kind, user_weights, j))
                .collect::<Result<_>>()?;
            for pair in rows.windows(2) {
                let diff = pair[0].iter().zip(&pair[1]).map(|(a, b)| a - b).collect();
                lp.add_eq(diff, 0.0);
            }
        }
        kind => {
            for j in 0..m {
                let coeffs = group_coefficients(relevance, groups, pi, kind, user_weights, j)?;
                lp.add_ge(coeffs, constraint.epsilon[j]);
            }
        }
    }
    Ok(lp)
}

/// Exact (pre-sampling) constrained quantity of every group under `policies`.
pub fn group_values(
    policies: &[StochasticRankingPolicy],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    kind: ConstraintKind,
    user_weights: &[f64],
) -> Result<Vec<f64>> {
    let x = stack(policies);
    (0..groups.n_groups())
        .map(|j| {
            let c = group_coefficients(relevance, groups, pi, kind, user_weights, j)?;
            Ok(c.iter().zip(&x).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Exact expected exposure of every group under `policies`.
pub fn policy_exposures(
    policies: &[StochasticRankingPolicy],
    groups: &GroupPartition,
    pi: &PositionWeights,
    user_weights: &[f64],
) -> Vec<f64> {
    let total: f64 = user_weights.iter().sum();
    let mut out = vec![0.0; groups.n_groups()];
    for (p, &w) in policies.iter().zip(user_weights) {
        for (i, e) in p.item_exposure(pi).into_iter().enumerate() {
            out[groups.group_of(i)] += w * e / total;
        }
    }
    out
}

/// Expected utility `sum_u w_u pi^T Sigma_u r_u`.
pub fn policy_utility(
    policies: &[StochasticRankingPolicy],
    relevance: &RelevanceMatrix,
    pi: &PositionWeights,
    user_weights: &[f64],
) -> f64 {
    policies
        .iter()
        .zip(user_weights)
        .enumerate()
        .map(|(u, (p, &w))| {
            let e = p.item_exposure(pi);
            w * e.iter().enumerate().map(|(i, v)| v * relevance.get(u, i)).sum::<f64>()
        })
        .sum()
}

fn stack(policies: &[StochasticRankingPolicy]) -> Vec<f64> {
    policies.iter().flat_map(|p| p.matrix().iter().copied()).collect()
}

/// Clamps negatives and rebalances rows and columns (Sinkhorn) so the LP
/// output is doubly stochastic to machine precision.
fn to_policy(mut m: Array2<f64>) -> Result<StochasticRankingPolicy> {
    if m.iter().any(|&v| v < -TOL_LP) {
        return Err(Error::Numerical("LP solution has entries below -tol_lp".into()));
    }
    m.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
    for _ in 0..1000 {
        for mut row in m.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        for mut col in m.columns_mut() {
            let s = col.sum();
            col.mapv_inplace(|v| v / s);
        }
        let worst = m
            .rows()
            .into_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        if worst < 1e-13 {
            break;
        }
    }
    StochasticRankingPolicy::new(m)
}

/// Output of [`fair_rank`].
#[derive(Debug, Clone)]
pub struct FairRanking {
    /// One sampled ranking per user.
    pub rankings: Vec<RankedList>,
    pub policies: Vec<StochasticRankingPolicy>,
    pub decompositions: Vec<BirkhoffDecomposition>,
    /// Expected utility of the randomized policy (equals the LP optimum).
    pub objective_value: f64,
    /// Exact expected exposure per group.
    pub exposures: Vec<f64>,
    /// Exact value of the constrained quantity per group.
    pub constraint_values: Vec<f64>,
}

/// Assemble, solve, decompose and sample.
///
/// When the per-user relevance sort already satisfies the constraint it is
/// returned directly: it is the unconstrained optimum, and this keeps the
/// lowest-index tie rule that a simplex vertex would not guarantee.
pub fn fair_rank(
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    constraint: &FairnessConstraint,
    user_weights: &[f64],
    rng: &mut RandomSource,
) -> Result<FairRanking> {
    fair_rank_with(&DenseSimplex::default(), relevance, groups, pi, constraint, user_weights, rng)
}

pub fn fair_rank_with(
    solver: &impl LpSolver,
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    constraint: &FairnessConstraint,
    user_weights: &[f64],
    rng: &mut RandomSource,
) -> Result<FairRanking> {
    check_inputs(relevance, groups, pi, constraint, user_weights)?;
    let (users, n) = (relevance.n_users(), relevance.n_items());

    let sorted: Vec<StochasticRankingPolicy> = (0..users)
        .map(|u| {
            let r = RankedList::by_scores(&relevance.row(u));
            StochasticRankingPolicy::new(r.to_matrix(n))
        })
        .collect::<Result<_>>()?;
    let policies = if satisfies(&sorted, relevance, groups, pi, constraint, user_weights)? {
        sorted
    } else {
        let lp = assemble_ranking_lp(relevance, groups, pi, constraint, user_weights)?;
        let sol = solver.solve(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::Infeasible),
            LpStatus::Unbounded => return Err(Error::Unbounded),
        }
        sol.x
            .chunks(n * n)
            .map(|block| to_policy(Array2::from_shape_vec((n, n), block.to_vec()).expect("n*n block")))
            .collect::<Result<_>>()?
    };

    let decompositions: Vec<BirkhoffDecomposition> = policies
        .iter()
        .map(|p| bvn_decompose(p, SUPPORT_TOL))
        .collect::<Result<_>>()?;
    let rankings = decompositions.iter().map(|d| sample_ranking(d, rng)).collect();
    let kind = match constraint.kind {
        ConstraintKind::ExposureEqual => ConstraintKind::ExposureFloor,
        k => k,
    };
    Ok(FairRanking {
        rankings,
        objective_value: policy_utility(&policies, relevance, pi, user_weights),
        exposures: policy_exposures(&policies, groups, pi, user_weights),
        constraint_values: group_values(&policies, relevance, groups, pi, kind, user_weights)?,
        decompositions,
        policies,
    })
}

fn satisfies(
    policies: &[StochasticRankingPolicy],
    relevance: &RelevanceMatrix,
    groups: &GroupPartition,
    pi: &PositionWeights,
    constraint: &FairnessConstraint,
    user_weights: &[f64],
) -> Result<bool> {
    Ok(match constraint.kind {
        ConstraintKind::ExposureEqual => {
            let e = policy_exposures(policies, groups, pi, user_weights);
            e.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12)
        }
        kind => group_values(policies, relevance, groups, pi, kind, user_weights)?
            .iter()
            .zip(&constraint.epsilon)
            .all(|(v, e)| v >= e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::lp::solve_lp;
    use approx::assert_abs_diff_eq;

    fn reference_market() -> RelevanceMatrix {
        RelevanceMatrix::from_rows(&[
            vec![0.9, 0.1, 0.0],
            vec![0.9, 0.4, 0.0],
            vec![0.2, 0.9, 0.1],
        ])
        .unwrap()
    }

    #[test]
    fn single_item_forced_to_one() {
        let rel = RelevanceMatrix::from_rows(&[vec![0.3]]).unwrap();
        let groups = GroupPartition::new(vec![0], 1).unwrap();
        let pi = PositionWeights::dcg(1).unwrap();
        let lp = assemble_ranking_lp(&rel, &groups, &pi, &FairnessConstraint::none(1), &[1.0]).unwrap();
        assert_eq!(lp.n_vars(), 1);
        let s = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn creator_example_lp() {
        let rel = reference_market();
        let groups = GroupPartition::singletons(3);
        let pi = PositionWeights::from_vec(vec![1.0, 0.0, 0.0]).unwrap();
        let w = [100.0, 100.0, 10.0];
        let lp = assemble_ranking_lp(&rel, &groups, &pi, &FairnessConstraint::none(3), &w).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(s.objective_value, 189.0, epsilon = 1e-7);
        let policies: Vec<_> = s
            .x
            .chunks(9)
            .map(|b| to_policy(Array2::from_shape_vec((3, 3), b.to_vec()).unwrap()).unwrap())
            .collect();
        let e = policy_exposures(&policies, &groups, &pi, &w);
        assert_abs_diff_eq!(e[0], 200.0 / 210.0, epsilon = 1e-7);
        assert_abs_diff_eq!(e[1], 10.0 / 210.0, epsilon = 1e-7);
        assert_abs_diff_eq!(e[2], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn opportunity_with_dead_group_is_degenerate() {
        let rel = RelevanceMatrix::from_rows(&[vec![0.5, 0.0]]).unwrap();
        let groups = GroupPartition::new(vec![0, 1], 2).unwrap();
        let pi = PositionWeights::dcg(2).unwrap();
        let c = FairnessConstraint::uniform(ConstraintKind::OpportunityFloor, 2, 0.1).unwrap();
        let err = assemble_ranking_lp(&rel, &groups, &pi, &c, &[1.0]);
        assert!(matches!(err, Err(Error::DegenerateGroup { group: 1 })));
    }

    #[test]
    fn unconstrained_returns_relevance_sort() {
        let rel = RelevanceMatrix::from_rows(&[vec![0.2, 0.7, 0.7, 0.1]]).unwrap();
        let groups = GroupPartition::new(vec![0, 0, 1, 1], 2).unwrap();
        let pi = PositionWeights::dcg(4).unwrap();
        let mut rng = RandomSource::new(3);
        let out = fair_rank(&rel, &groups, &pi, &FairnessConstraint::none(2), &[1.0], &mut rng).unwrap();
        assert_eq!(out.rankings[0].items(), &[1, 2, 0, 3]);
        assert_eq!(out.decompositions[0].terms().len(), 1);
    }

    #[test]
    fn two_item_floor_protects_minority() {
        // Item 0 (group 0) dominates. Floor 0.4 * sum(pi) on both groups.
        let rel = RelevanceMatrix::from_rows(&[vec![1.0, 0.1]]).unwrap();
        let groups = GroupPartition::new(vec![0, 1], 2).unwrap();
        let pi = PositionWeights::dcg(2).unwrap();
        let floor = 0.4 * pi.total();
        let c = FairnessConstraint::uniform(ConstraintKind::ExposureFloor, 2, floor).unwrap();
        let mut rng = RandomSource::new(5);
        let out = fair_rank(&rel, &groups, &pi, &c, &[1.0], &mut rng).unwrap();
        assert!(out.exposures[1] >= floor - 1e-7);
        // By hand: Sigma = [[1-p, p], [p, 1-p]], exposure_1 = p + (1-p) pi2 = floor.
        let pi2 = pi.get(1);
        let p = (floor - pi2) / (1.0 - pi2);
        let by_hand = (1.0 - p) * (1.0 + 0.1 * pi2) + p * (0.1 + pi2);
        assert_abs_diff_eq!(out.objective_value, by_hand, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_floor_surfaces() {
        let rel = RelevanceMatrix::from_rows(&[vec![1.0, 0.1]]).unwrap();
        let groups = GroupPartition::new(vec![0, 1], 2).unwrap();
        let pi = PositionWeights::dcg(2).unwrap();
        let c = FairnessConstraint::uniform(ConstraintKind::ExposureFloor, 2, pi.total()).unwrap();
        let mut rng = RandomSource::new(5);
        assert!(matches!(fair_rank(&rel, &groups, &pi, &c, &[1.0], &mut rng), Err(Error::Infeasible)));
    }

    #[test]
    fn exposure_equal_balances_groups() {
        let rel = RelevanceMatrix::from_rows(&[vec![0.9, 0.8, 0.1], vec![0.7, 0.9, 0.2]]).unwrap();
        let groups = GroupPartition::new(vec![0, 0, 1], 2).unwrap();
        let pi = PositionWeights::from_vec(vec![1.0, 0.0, 0.0]).unwrap();
        let c = FairnessConstraint::new(ConstraintKind::ExposureEqual, vec![]).unwrap();
        let mut rng = RandomSource::new(1);
        let out = fair_rank(&rel, &groups, &pi, &c, &[1.0, 1.0], &mut rng).unwrap();
        assert_abs_diff_eq!(out.exposures[0], out.exposures[1], epsilon = 1e-7);
        assert_abs_diff_eq!(out.exposures[0], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn impact_floor_weights_by_relevance() {
        let rel = RelevanceMatrix::from_rows(&[vec![0.9, 0.5]]).unwrap();
        let groups = GroupPartition::new(vec![0, 1], 2).unwrap();
        let pi = PositionWeights::from_vec(vec![1.0, 0.0]).unwrap();
        let c = FairnessConstraint::new(ConstraintKind::ImpactFloor, vec![0.0, 0.25]).unwrap();
        let mut rng = RandomSource::new(1);
        let out = fair_rank(&rel, &groups, &pi, &c, &[1.0], &mut rng).unwrap();
        // Item 1 must be on top with probability 0.25 / 0.5.
        assert_abs_diff_eq!(out.exposures[1], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(out.constraint_values[1], 0.25, epsilon = 1e-7);
    }
}
