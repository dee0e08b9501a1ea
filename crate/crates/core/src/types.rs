//! Domain types shared by the metric, optimizer and simulation modules.
//!
//! Indices are zero-based throughout: users `0..n_users`, items `0..n_items`,
//! groups `0..m`, positions `0..n`.

use ndarray::Array2;

use crate::error::{invalid, Result};

/// Row and column sums of a doubly stochastic matrix must equal one within this.
pub const TOL_DS: f64 = 1e-9;

/// Latent relevance `r[u][i]` in `[0, 1]`, users (or user groups) by items.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    values: Array2<f64>,
}

impl RelevanceMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (users, items) = values.dim();
        if users == 0 || items == 0 {
            return invalid("relevance matrix must have at least one user and one item");
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("relevance entry {v} outside [0, 1]"));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let items = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != items) {
            return invalid("relevance rows have differing lengths");
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), items), flat)
            .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
        Self::new(values)
    }

    pub fn n_users(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, user: usize, item: usize) -> f64 {
        self.values[[user, item]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, user: usize) -> Vec<f64> {
        self.values.row(user).to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Multiplies every entry by `c`, without the `[0, 1]` check.
    ///
    /// Scaled matrices are only meaningful for metric identities; the result
    /// is not a valid relevance matrix when `c > 1`.
    pub fn scaled_unchecked(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
        }
    }
}

/// Assignment of every item to exactly one of `m` groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    item_to_group: Vec<usize>,
    m: usize,
}

impl GroupPartition {
    pub fn new(item_to_group: Vec<usize>, m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("a partition needs at least one group");
        }
        if let Some(g) = item_to_group.iter().find(|&&g| g >= m) {
            return invalid(format!("group index {g} out of range for m = {m}"));
        }
        Ok(Self { item_to_group, m })
    }

    /// Partition with `m` inferred as one past the largest group index.
    pub fn from_labels(item_to_group: Vec<usize>) -> Result<Self> {
        let m = item_to_group.iter().max().map_or(0, |g| g + 1);
        Self::new(item_to_group, m)
    }

    /// Every item in its own group.
    pub fn singletons(n_items: usize) -> Self {
        Self {
            item_to_group: (0..n_items).collect(),
            m: n_items,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.m
    }

    pub fn n_items(&self) -> usize {
        self.item_to_group.len()
    }

    pub fn group_of(&self, item: usize) -> usize {
        self.item_to_group[item]
    }

    pub fn contains(&self, group: usize, item: usize) -> bool {
        self.item_to_group[item] == group
    }

    pub fn labels(&self) -> &[usize] {
        &self.item_to_group
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.item_to_group
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(i, _)| i)
    }

    /// Groups with no items. Permitted, but usually a configuration mistake.
    pub fn empty_groups(&self) -> Vec<usize> {
        (0..self.m)
            .filter(|&g| !self.item_to_group.contains(&g))
            .collect()
    }

    pub(crate) fn check_group(&self, group: usize) -> Result<()> {
        if group >= self.m {
            return invalid(format!("group {group} out of range for m = {}", self.m));
        }
        Ok(())
    }
}

/// Position weights `pi[k]`: non-increasing, each in `[0, 1]`.
///
/// Zero tails are allowed so top-k recommendation can be expressed over a
/// full-length ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionWeights {
    pi: Vec<f64>,
}

impl PositionWeights {
    /// DCG weights `1 / log2(k + 1)` for ranks `k = 1..=n`.
    pub fn dcg(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("position weights need n >= 1");
        }
        let pi = (1..=n).map(|k| 1.0 / ((k + 1) as f64).log2()).collect();
        Ok(Self { pi })
    }

    /// DCG weights on the first `k` of `n` positions, zero afterwards.
    pub fn top_k(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return invalid(format!("top-k needs 1 <= k <= n, got k = {k}, n = {n}"));
        }
        let mut pi = Self::dcg(k)?.pi;
        pi.resize(n, 0.0);
        Ok(Self { pi })
    }

    pub fn from_vec(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return invalid("position weights must be non-empty");
        }
        if let Some(w) = pi.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return invalid(format!("position weight {w} outside [0, 1]"));
        }
        if pi.windows(2).any(|w| w[1] > w[0]) {
            return invalid("position weights must be non-increasing");
        }
        Ok(Self { pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.pi[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum()
    }
}

/// A ranked list of distinct item indices, best first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankedList {
    items: Vec<usize>,
}

impl RankedList {
    pub fn new(items: Vec<usize>) -> Result<Self> {
        let mut seen = items.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return invalid("ranked list contains duplicate items");
        }
        Ok(Self { items })
    }

    pub(crate) fn from_permutation(items: Vec<usize>) -> Self {
        Self { items }
    }

    /// Items sorted by descending score; equal scores go to the lower index.
    pub fn by_scores(scores: &[f64]) -> Self {
        let mut items: Vec<usize> = (0..scores.len()).collect();
        items.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn get(&self, k: usize) -> usize {
        self.items[k]
    }

    /// Permutation matrix with `P[k][items[k]] = 1` (positions by items).
    pub fn to_matrix(&self, n_items: usize) -> Array2<f64> {
        let mut p = Array2::zeros((self.items.len(), n_items));
        for (k, &i) in self.items.iter().enumerate() {
            p[[k, i]] = 1.0;
        }
        p
    }

    pub(crate) fn check_against(&self, n_items: usize, pi: &PositionWeights) -> Result<()> {
        if self.items.len() > pi.len() {
            return invalid(format!(
                "ranking of length {} exceeds {} position weights",
                self.items.len(),
                pi.len()
            ));
        }
        if let Some(i) = self.items.iter().find(|&&i| i >= n_items) {
            return invalid(format!("item {i} out of range for {n_items} items"));
        }
        Ok(())
    }
}

/// Per-user randomized ranking: doubly stochastic matrix, positions by items.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticRankingPolicy {
    sigma: Array2<f64>,
}

impl StochasticRankingPolicy {
    /// Validates double stochasticity within [`TOL_DS`] and clamps
    /// slightly negative entries to zero.
    pub fn new(sigma: Array2<f64>) -> Result<Self> {
        Self::with_tolerance(sigma, TOL_DS)
    }

    pub fn with_tolerance(mut sigma: Array2<f64>, tol: f64) -> Result<Self> {
        let (rows, cols) = sigma.dim();
        if rows != cols || rows == 0 {
            return invalid(format!("policy matrix must be square, got {rows}x{cols}"));
        }
        if sigma.iter().any(|&v| !v.is_finite() || v < -tol) {
            return invalid("policy matrix has negative or non-finite entries");
        }
        sigma.mapv_inplace(|v| v.max(0.0));
        for (k, row) in sigma.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            if (s - 1.0).abs() > tol {
                return invalid(format!("row {k} sums to {s}"));
            }
        }
        for (i, col) in sigma.columns().into_iter().enumerate() {
            let s: f64 = col.sum();
            if (s - 1.0).abs() > tol {
                return invalid(format!("column {i} sums to {s}"));
            }
        }
        Ok(Self { sigma })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sigma: Array2::eye(n),
        }
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.sigma
    }

    /// Expected position-weighted exposure of each item: `pi^T Sigma`.
    pub fn item_exposure(&self, pi: &PositionWeights) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|k| pi.get(k) * self.sigma[[k, i]]).sum())
            .collect()
    }
}
