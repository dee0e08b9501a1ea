//! Maximum bipartite matching by augmenting paths (Kuhn's algorithm).
//!
//! Rows are visited in ascending order. Each row takes its lowest free
//! column before trying augmenting paths in ascending column order, so the
//! matching is a deterministic function of the adjacency.

/// Dense bipartite graph: `adj[r][c]` is true when row `r` may match column `c`.
pub struct BipartiteGraph<'a> {
    adj: &'a [Vec<bool>],
    n_cols: usize,
}

impl<'a> BipartiteGraph<'a> {
    pub fn new(adj: &'a [Vec<bool>]) -> Self {
        let n_cols = adj.first().map_or(0, Vec::len);
        Self { adj, n_cols }
    }

    /// Maximum matching as `row -> Some(col)`.
    pub fn max_matching(&self) -> Vec<Option<usize>> {
        let mut col_owner: Vec<Option<usize>> = vec![None; self.n_cols];
        for r in 0..self.adj.len() {
            let mut visited = vec![false; self.n_cols];
            self.augment(r, &mut visited, &mut col_owner);
        }
        let mut row_match = vec![None; self.adj.len()];
        for (c, owner) in col_owner.iter().enumerate() {
            if let Some(r) = owner {
                row_match[*r] = Some(c);
            }
        }
        row_match
    }

    /// Perfect matching `row -> col`, if one exists.
    pub fn perfect_matching(&self) -> Option<Vec<usize>> {
        if self.adj.len() != self.n_cols {
            return None;
        }
        self.max_matching().into_iter().collect()
    }

    /// Prefers a free column (lowest index) before displacing another row.
    fn augment(&self, r: usize, visited: &mut [bool], col_owner: &mut [Option<usize>]) -> bool {
        if let Some(c) = (0..self.n_cols).find(|&c| self.adj[r][c] && !visited[c] && col_owner[c].is_none()) {
            visited[c] = true;
            col_owner[c] = Some(r);
            return true;
        }
        for c in 0..self.n_cols {
            if !self.adj[r][c] || visited[c] {
                continue;
            }
            visited[c] = true;
            if let Some(other) = col_owner[c] {
                if self.augment(other, visited, col_owner) {
                    col_owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
}
