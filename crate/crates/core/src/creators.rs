//! Creator-side feedback loop: fractional allocation of user groups to
//! creators under exposure or opportunity floors, followed by a post-hoc
//! sigmoid retention model and the utility users can expect afterwards.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optimizer::{DenseSimplex, LinearProgram, LpSolution, LpSolver, LpStatus};
use crate::types::{RelevanceMatrix, TOL_DS};

/// User groups (rows of `relevance`) of given sizes facing creators (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CreatorMarket {
    group_sizes: Vec<f64>,
    relevance: RelevanceMatrix,
    theta: f64,
    kappa: f64,
}

/// JSON form of a [`CreatorMarket`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub group_sizes: Vec<f64>,
    pub relevance: Vec<Vec<f64>>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_theta() -> f64 {
    0.1
}

fn default_kappa() -> f64 {
    100.0
}

impl Default for MarketSpec {
    /// Three user groups of sizes 100, 100, 10 and three creators.
    fn default() -> Self {
        Self {
            group_sizes: vec![100.0, 100.0, 10.0],
            relevance: vec![
                vec![0.9, 0.1, 0.0],
                vec![0.9, 0.4, 0.0],
                vec![0.2, 0.9, 0.1],
            ],
            theta: default_theta(),
            kappa: default_kappa(),
        }
    }
}

impl MarketSpec {
    pub fn build(&self) -> Result<CreatorMarket> {
        CreatorMarket::new(
            self.group_sizes.clone(),
            RelevanceMatrix::from_rows(&self.relevance)?,
            self.theta,
            self.kappa,
        )
    }
}

impl CreatorMarket {
    pub fn new(group_sizes: Vec<f64>, relevance: RelevanceMatrix, theta: f64, kappa: f64) -> Result<Self> {
        if group_sizes.len() != relevance.n_users() {
            return invalid(format!(
                "{} group sizes for {} relevance rows",
                group_sizes.len(),
                relevance.n_users()
            ));
        }
        if group_sizes.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return invalid("group sizes must be positive");
        }
        if !theta.is_finite() || !kappa.is_finite() {
            return invalid("retention parameters must be finite");
        }
        Ok(Self { group_sizes, relevance, theta, kappa })
    }

    pub fn reference() -> Self {
        MarketSpec::default().build().expect("built-in market is valid")
    }

    pub fn group_sizes(&self) -> &[f64] {
        &self.group_sizes
    }

    pub fn relevance(&self) -> &RelevanceMatrix {
        &self.relevance
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn n_creators(&self) -> usize {
        self.relevance.n_items()
    }

    /// `N = sum_u n_u`.
    pub fn total_users(&self) -> f64 {
        self.group_sizes.iter().sum()
    }

    /// `d_i = sum_u n_u r[u, i]`.
    pub fn relevance_mass(&self, i: usize) -> f64 {
        self.group_sizes
            .iter()
            .enumerate()
            .map(|(u, n)| n * self.relevance.get(u, i))
            .sum()
    }

    pub fn spec(&self) -> MarketSpec {
        MarketSpec {
            group_sizes: self.group_sizes.clone(),
            relevance: self.relevance.to_rows(),
            theta: self.theta,
            kappa: self.kappa,
        }
    }
}

/// Row-stochastic matrix: `sigma[u][i]` is the share of group `u` shown creator `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    sigma: Array2<f64>,
}

impl FractionalAllocation {
    pub fn new(mut sigma: Array2<f64>) -> Result<Self> {
        if sigma.iter().any(|&v| v < -TOL_DS || !v.is_finite()) {
            return invalid("allocation entries must be non-negative");
        }
        sigma.mapv_inplace(|v| v.max(0.0));
        for (u, row) in sigma.rows().into_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > TOL_DS {
                return invalid(format!("allocation row {u} sums to {s}"));
            }
        }
        Ok(Self { sigma })
    }

    /// Group `u` fully on creator `choice[u]`.
    pub fn vertex(choice: &[usize], n_creators: usize) -> Result<Self> {
        let mut sigma = Array2::zeros((choice.len(), n_creators));
        for (u, &i) in choice.iter().enumerate() {
            if i >= n_creators {
                return invalid(format!("creator {i} out of range"));
            }
            sigma[[u, i]] = 1.0;
        }
        Self::new(sigma)
    }

    pub fn uniform(n_groups: usize, n_creators: usize) -> Self {
        Self {
            sigma: Array2::from_elem((n_groups, n_creators), 1.0 / n_creators as f64),
        }
    }

    pub fn sigma(&self) -> &Array2<f64> {
        &self.sigma
    }

    fn check(&self, market: &CreatorMarket) {
        assert_eq!(
            self.sigma.dim(),
            (market.n_groups(), market.n_creators()),
            "allocation shape does not match market"
        );
    }
}

/// `(1/N) sum_u n_u sigma[u, i]`.
pub fn creator_exposure(alloc: &FractionalAllocation, market: &CreatorMarket, i: usize) -> f64 {
    alloc.check(market);
    let n = market.total_users();
    market
        .group_sizes
        .iter()
        .enumerate()
        .map(|(u, size)| size * alloc.sigma[[u, i]])
        .sum::<f64>()
        / n
}

pub fn creator_exposures(alloc: &FractionalAllocation, market: &CreatorMarket) -> Vec<f64> {
    (0..market.n_creators()).map(|i| creator_exposure(alloc, market, i)).collect()
}

/// Logistic retention `1 / (1 + exp(-kappa (exposure - theta)))`.
///
/// The argument is clamped to +-700 and the result to `[1e-300, 1 - 1e-16]`.
pub fn retention_prob(exposure: f64, market: &CreatorMarket) -> f64 {
    sigmoid(market.kappa * (exposure - market.theta))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-700.0, 700.0);
    (1.0 / (1.0 + (-z).exp())).clamp(1e-300, 1.0 - 1e-16)
}

/// `sum_u sum_i n_u r[u, i] sigma[u, i]`.
pub fn immediate_utility(alloc: &FractionalAllocation, market: &CreatorMarket) -> f64 {
    alloc.check(market);
    let mut total = 0.0;
    for (u, size) in market.group_sizes.iter().enumerate() {
        for i in 0..market.n_creators() {
            total += size * market.relevance.get(u, i) * alloc.sigma[[u, i]];
        }
    }
    total
}

/// Per group, `max_i r[u, i] p_i` with `p_i` the retention of creator `i`.
pub fn future_utility(alloc: &FractionalAllocation, market: &CreatorMarket) -> Vec<f64> {
    let p: Vec<f64> = creator_exposures(alloc, market)
        .into_iter()
        .map(|e| retention_prob(e, market))
        .collect();
    (0..market.n_groups())
        .map(|u| {
            p.iter()
                .enumerate()
                .map(|(i, pi)| market.relevance.get(u, i) * pi)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketConstraint {
    /// `(1/N) sum_u n_u sigma[u, i] >= eps` for every creator.
    Exposure,
    /// `(1/d_i) sum_u n_u sigma[u, i] >= eps` for every creator.
    Opportunity,
}

impl MarketConstraint {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exposure => "exposure",
            Self::Opportunity => "opportunity",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Self::Exposure => (0..=33).map(|k| k as f64 / 100.0).collect(),
            Self::Opportunity => (0..=50).map(|k| k as f64 / 50.0).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AllocationSolve {
    /// Present when the LP is optimal.
    pub allocation: Option<FractionalAllocation>,
    pub lp: LpSolution,
}

/// Builds the allocation LP: variables `sigma[u][i]` at index `u * m + i`.
pub fn allocation_lp(market: &CreatorMarket, kind: MarketConstraint, epsilon: f64) -> Result<LinearProgram> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return invalid(format!("epsilon = {epsilon} must be finite and non-negative"));
    }
    let (g, m) = (market.n_groups(), market.n_creators());
    let mut objective = vec![0.0; g * m];
    for u in 0..g {
        for i in 0..m {
            objective[u * m + i] = market.group_sizes[u] * market.relevance.get(u, i);
        }
    }
    let mut lp = LinearProgram::maximize(objective);
    for u in 0..g {
        let mut row = vec![0.0; g * m];
        row[u * m..(u + 1) * m].fill(1.0);
        lp.add_eq(row, 1.0);
    }
    for i in 0..m {
        let norm = match kind {
            MarketConstraint::Exposure => market.total_users(),
            MarketConstraint::Opportunity => {
                let d = market.relevance_mass(i);
                if d <= 0.0 {
                    return Err(Error::DegenerateGroup { group: i });
                }
                d
            }
        };
        let mut row = vec![0.0; g * m];
        for u in 0..g {
            row[u * m + i] = market.group_sizes[u] / norm;
        }
        lp.add_ge(row, epsilon);
    }
    Ok(lp)
}

/// Maximizes immediate utility subject to the floor. Infeasibility is
/// reported through `lp.status`, not as an error.
pub fn solve_allocation(market: &CreatorMarket, kind: MarketConstraint, epsilon: f64) -> Result<AllocationSolve> {
    let lp = allocation_lp(market, kind, epsilon)?;
    let sol = DenseSimplex::default().solve(&lp)?;
    let allocation = match sol.status {
        LpStatus::Optimal => {
            let m = market.n_creators();
            let mut sigma = Array2::from_shape_vec((market.n_groups(), m), sol.x.clone())
                .expect("g * m variables");
            sigma.mapv_inplace(|v| v.max(0.0));
            for mut row in sigma.rows_mut() {
                let s = row.sum();
                row.mapv_inplace(|v| v / s);
            }
            Some(FractionalAllocation::new(sigma)?)
        }
        _ => None,
    };
    Ok(AllocationSolve { allocation, lp: sol })
}

/// Outcome of one grid point. Quantities are NaN when the LP is not optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub status: LpStatus,
    pub exposures: Vec<f64>,
    pub retention: Vec<f64>,
    pub utility: f64,
    pub future_utility: Vec<f64>,
}

impl SweepRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// One record per grid point, in grid order. Grid points are solved in parallel.
pub fn epsilon_sweep(market: &CreatorMarket, kind: MarketConstraint, grid: &[f64]) -> Result<Vec<SweepRecord>> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return invalid("epsilon grid must be sorted ascending");
    }
    grid.par_iter()
        .map(|&epsilon| {
            let solve = solve_allocation(market, kind, epsilon)?;
            Ok(match solve.allocation {
                Some(alloc) => {
                    let exposures = creator_exposures(&alloc, market);
                    SweepRecord {
                        epsilon,
                        status: solve.lp.status,
                        retention: exposures.iter().map(|&e| retention_prob(e, market)).collect(),
                        exposures,
                        utility: immediate_utility(&alloc, market),
                        future_utility: future_utility(&alloc, market),
                    }
                }
                None => SweepRecord {
                    epsilon,
                    status: solve.lp.status,
                    exposures: vec![f64::NAN; market.n_creators()],
                    retention: vec![f64::NAN; market.n_creators()],
                    utility: f64::NAN,
                    future_utility: vec![f64::NAN; market.n_groups()],
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exposures_of_simple_allocations() {
        let market = CreatorMarket::reference();
        let all_first = FractionalAllocation::vertex(&[0, 0, 0], 3).unwrap();
        assert_eq!(creator_exposures(&all_first, &market), vec![1.0, 0.0, 0.0]);
        let uniform = FractionalAllocation::uniform(3, 3);
        for e in creator_exposures(&uniform, &market) {
            assert_abs_diff_eq!(e, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn argmax_vertex_matches_hand_values() {
        let market = CreatorMarket::reference();
        let best = FractionalAllocation::vertex(&[0, 0, 1], 3).unwrap();
        let e = creator_exposures(&best, &market);
        assert_abs_diff_eq!(e[0], 200.0 / 210.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1], 10.0 / 210.0, epsilon = 1e-15);
        assert_eq!(e[2], 0.0);
        assert_abs_diff_eq!(immediate_utility(&best, &market), 189.0, epsilon = 1e-12);
        assert_abs_diff_eq!(future_utility(&best, &market)[2], 0.2, epsilon = 1e-3);
    }

    #[test]
    fn retention_values() {
        let market = CreatorMarket::reference();
        assert_eq!(retention_prob(0.1, &market), 0.5);
        assert_abs_diff_eq!(retention_prob(0.0, &market), 1.0 / (1.0 + 10f64.exp()), epsilon = 1e-18);
        assert_eq!(retention_prob(200.0 / 210.0, &market), 1.0 - 1e-16);
        assert!(sigmoid(-1e6) >= 1e-300);
    }

    #[test]
    fn uniform_utility() {
        let market = CreatorMarket::reference();
        let u = immediate_utility(&FractionalAllocation::uniform(3, 3), &market);
        assert_abs_diff_eq!(u, 100.0 / 3.0 + 130.0 / 3.0 + 12.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn all_on_last_creator() {
        let market = CreatorMarket::reference();
        let a = FractionalAllocation::vertex(&[2, 2, 2], 3).unwrap();
        assert_abs_diff_eq!(future_utility(&a, &market)[2], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn unconstrained_solve_is_row_argmax() {
        let market = CreatorMarket::reference();
        let s = solve_allocation(&market, MarketConstraint::Exposure, 0.0).unwrap();
        assert_abs_diff_eq!(s.lp.objective_value, 189.0, epsilon = 1e-7);
        let alloc = s.allocation.unwrap();
        let expected = FractionalAllocation::vertex(&[0, 0, 1], 3).unwrap();
        for (a, b) in alloc.sigma().iter().zip(expected.sigma()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn full_floor_equalizes() {
        let market = CreatorMarket::reference();
        let s = solve_allocation(&market, MarketConstraint::Exposure, 1.0 / 3.0).unwrap();
        let alloc = s.allocation.unwrap();
        for e in creator_exposures(&alloc, &market) {
            assert_abs_diff_eq!(e, 1.0 / 3.0, epsilon = 1e-7);
        }
        assert!(immediate_utility(&alloc, &market) < 189.0);
    }

    #[test]
    fn over_floor_is_infeasible() {
        let market = CreatorMarket::reference();
        let s = solve_allocation(&market, MarketConstraint::Exposure, 0.34).unwrap();
        assert_eq!(s.lp.status, LpStatus::Infeasible);
        assert!(s.allocation.is_none());
    }

    #[test]
    fn opportunity_denominators() {
        let market = CreatorMarket::reference();
        let d: Vec<f64> = (0..3).map(|i| market.relevance_mass(i)).collect();
        assert_abs_diff_eq!(d[0], 182.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 59.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn opportunity_dead_creator_is_degenerate() {
        let market = CreatorMarket::new(
            vec![1.0],
            RelevanceMatrix::from_rows(&[vec![0.5, 0.0]]).unwrap(),
            0.1,
            100.0,
        )
        .unwrap();
        assert!(matches!(
            solve_allocation(&market, MarketConstraint::Opportunity, 0.1),
            Err(Error::DegenerateGroup { group: 1 })
        ));
    }

    #[test]
    fn default_grids() {
        let e = MarketConstraint::Exposure.default_grid();
        assert_eq!((e.len(), e[10], e[33]), (34, 0.1, 0.33));
        let o = MarketConstraint::Opportunity.default_grid();
        assert_eq!((o.len(), o[20], o[50]), (51, 0.4, 1.0));
    }

    #[test]
    fn sweep_records_infeasible_points() {
        let market = CreatorMarket::reference();
        let recs = epsilon_sweep(&market, MarketConstraint::Exposure, &[0.0, 0.5]).unwrap();
        assert!(recs[0].is_optimal());
        assert_eq!(recs[1].status, LpStatus::Infeasible);
        assert!(recs[1].utility.is_nan());
        assert!(epsilon_sweep(&market, MarketConstraint::Exposure, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let market = CreatorMarket::reference();
        assert_eq!(market.spec().build().unwrap(), market);
        let json = r#"{"group_sizes": [1, 2], "relevance": [[0.5], [0.25]]}"#;
        let spec: MarketSpec = serde_json::from_str(json).unwrap();
        assert_eq!((spec.theta, spec.kappa), (0.1, 100.0));
        assert!(serde_json::from_str::<MarketSpec>(r#"{"group_sizes": [], "relevance": [], "thta": 1}"#).is_err());
    }
}
