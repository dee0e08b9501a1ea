//! Birkhoff-von Neumann decomposition of doubly stochastic matrices and
//! sampling of rankings from the resulting mixture.

use ndarray::Array2;

use super::matching::BipartiteGraph;
use crate::error::{invalid, Error, Result};
use crate::random::RandomSource;
use crate::types::{RankedList, StochasticRankingPolicy, TOL_DS};

/// Entries at or below this are outside the support during decomposition.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Entrywise reconstruction tolerance of a decomposition.
pub const TOL_BVN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffTerm {
    pub weight: f64,
    pub permutation: RankedList,
}

/// Convex combination of permutation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffDecomposition {
    n: usize,
    terms: Vec<BirkhoffTerm>,
}

impl BirkhoffDecomposition {
    pub fn new(n: usize, terms: Vec<BirkhoffTerm>) -> Result<Self> {
        if terms.is_empty() {
            return invalid("decomposition needs at least one term");
        }
        if terms
            .iter()
            .any(|t| !(t.weight > 0.0 && t.weight <= 1.0 + TOL_DS) || t.permutation.len() != n)
        {
            return invalid("decomposition terms need weights in (0, 1] and full permutations");
        }
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > TOL_DS {
            return invalid(format!("decomposition weights sum to {total}"));
        }
        Ok(Self { n, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[BirkhoffTerm] {
        &self.terms
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// `sum_k weight_k P(permutation_k)`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for t in &self.terms {
            for (k, &i) in t.permutation.items().iter().enumerate() {
                m[[k, i]] += t.weight;
            }
        }
        m
    }

    /// Upper bound on the term count of a greedy decomposition.
    pub fn max_terms(n: usize) -> usize {
        (n.saturating_sub(1)).pow(2) + 1
    }
}

/// Greedy decomposition: repeatedly take a perfect matching on the support,
/// subtract its smallest entry, and drop entries that fall to `tol` or below.
pub fn bvn_decompose(sigma: &StochasticRankingPolicy, tol: f64) -> Result<BirkhoffDecomposition> {
    let n = sigma.n();
    let mut residual = sigma.matrix().clone();
    residual.mapv_inplace(|v| if v > tol { v } else { 0.0 });
    let mut terms = Vec::new();
    let limit = BirkhoffDecomposition::max_terms(n);
    // Mass left when the residual is treated as numerically empty.
    let done = |r: &Array2<f64>| r.iter().all(|&v| v <= TOL_BVN);

    while !done(&residual) {
        if terms.len() >= limit {
            return Err(Error::DecompositionFailure { residual });
        }
        let adj: Vec<Vec<bool>> = residual
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&v| v > tol).collect())
            .collect();
        let Some(matching) = BipartiteGraph::new(&adj).perfect_matching() else {
            return Err(Error::DecompositionFailure { residual });
        };
        let (arg_k, weight) = matching
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, residual[[k, i]]))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        for (k, &i) in matching.iter().enumerate() {
            let v = residual[[k, i]] - weight;
            residual[[k, i]] = if k == arg_k || v <= tol { 0.0 } else { v };
        }
        terms.push(BirkhoffTerm {
            weight,
            permutation: RankedList::from_permutation(matching),
        });
    }

    let total: f64 = terms.iter().map(|t| t.weight).sum();
    if terms.is_empty() || (total - 1.0).abs() > 1e-6 {
        return Err(Error::DecompositionFailure { residual });
    }
    for t in terms.iter_mut() {
        t.weight /= total;
    }
    BirkhoffDecomposition::new(n, terms)
}

/// Draws `permutation_k` with probability `weight_k` (one uniform draw).
pub fn sample_ranking(decomp: &BirkhoffDecomposition, rng: &mut RandomSource) -> RankedList {
    let u = rng.uniform() * decomp.weight_sum();
    let mut acc = 0.0;
    for t in decomp.terms() {
        acc += t.weight;
        if u < acc {
            return t.permutation.clone();
        }
    }
    decomp.terms().last().expect("non-empty decomposition").permutation.clone()
}
