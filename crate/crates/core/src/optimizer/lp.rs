//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems are stated as maximisation over `lo <= x <= hi` with equality rows
//! `a.x = b` and lower-bound rows `a.x >= b`. Lower variable bounds must be
//! finite; upper bounds may be `f64::INFINITY`.

use crate::error::{invalid, Error, Result};

/// Feasibility tolerance for constraints of an optimal solution.
pub const TOL_LP: f64 = 1e-7;

const PIVOT_EPS: f64 = 1e-10;
const COST_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_constraints: Vec<Constraint>,
    /// `coeffs . x >= rhs`
    pub ineq_constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Maximise `objective . x` with every variable in `[0, inf)`.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_constraints.push(Constraint { coeffs, rhs });
        self
    }

    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_constraints.push(Constraint { coeffs, rhs });
        self
    }

    /// `coeffs . x <= rhs`, stored as `-coeffs . x >= -rhs`.
    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        let neg = coeffs.into_iter().map(|c| -c).collect();
        self.add_ge(neg, -rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if n == 0 {
            return invalid("linear program has no variables");
        }
        if self.bounds.len() != n {
            return invalid(format!("{} bounds for {n} variables", self.bounds.len()));
        }
        for c in self.eq_constraints.iter().chain(&self.ineq_constraints) {
            if c.coeffs.len() != n {
                return invalid(format!("constraint with {} coefficients for {n} variables", c.coeffs.len()));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return invalid("non-finite constraint data");
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite objective coefficient");
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() {
                return invalid(format!("variable {i} needs a finite lower bound"));
            }
            if lo > hi {
                return invalid(format!("variable {i} has lo {lo} > hi {hi}"));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |c: &Constraint| c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let eq = self.eq_constraints.iter().map(|c| (dot(c) - c.rhs).abs());
        let ge = self.ineq_constraints.iter().map(|c| (c.rhs - dot(c)).max(0.0));
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        eq.chain(ge).chain(bounds).fold(0.0, f64::max)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. `x` is empty and `objective_value` is `-inf` (infeasible)
/// or `+inf` (unbounded) unless the status is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn infeasible() -> Self {
        Self {
            x: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            status: LpStatus::Infeasible,
        }
    }

    fn unbounded() -> Self {
        Self {
            x: Vec::new(),
            objective_value: f64::INFINITY,
            status: LpStatus::Unbounded,
        }
    }
}

/// Anything that can solve a [`LinearProgram`].
pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;
}

/// Dense tableau simplex. Deterministic: Bland's rule picks the lowest-index
/// improving column and breaks ratio ties by the lowest basic variable.
#[derive(Debug, Clone, Copy)]
pub struct DenseSimplex {
    pub tol: f64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self { tol: TOL_LP }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    DenseSimplex::default().solve(lp)
}

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        lp.validate()?;
        let mut tab = Tableau::standard_form(lp);
        if !tab.phase_one()? {
            return Ok(LpSolution::infeasible());
        }
        let shifted_obj: Vec<f64> = lp.objective.clone();
        if !tab.phase_two(&shifted_obj)? {
            return Ok(LpSolution::unbounded());
        }
        let y = tab.primal();
        let x: Vec<f64> = y
            .iter()
            .zip(&lp.bounds)
            .map(|(v, &(lo, hi))| (v + lo).clamp(lo, hi))
            .collect();
        let violation = lp.max_violation(&x);
        if violation > self.tol {
            return Err(Error::Numerical(format!(
                "simplex solution violates constraints by {violation:e}"
            )));
        }
        Ok(LpSolution {
            objective_value: lp.evaluate(&x),
            x,
            status: LpStatus::Optimal,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    /// rows x (cols + 1); last entry of each row is the rhs.
    rows: Vec<Vec<f64>>,
    kinds: Vec<ColKind>,
    basis: Vec<usize>,
    n_struct: usize,
    scale: f64,
}

impl Tableau {
    fn standard_form(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let shift = |c: &Constraint| -> f64 {
            c.rhs - c.coeffs.iter().zip(&lp.bounds).map(|(a, (lo, _))| a * lo).sum::<f64>()
        };

        // (coeffs over structurals, slack coefficient, rhs)
        let mut raw: Vec<(Vec<f64>, Option<f64>, f64)> = Vec::new();
        for c in &lp.eq_constraints {
            raw.push((c.coeffs.clone(), None, shift(c)));
        }
        for c in &lp.ineq_constraints {
            raw.push((c.coeffs.clone(), Some(-1.0), shift(c)));
        }
        for (i, &(lo, hi)) in lp.bounds.iter().enumerate() {
            if hi.is_finite() {
                let mut coeffs = vec![0.0; n];
                coeffs[i] = 1.0;
                raw.push((coeffs, Some(1.0), hi - lo));
            }
        }
        for row in raw.iter_mut() {
            if row.2 < 0.0 {
                row.0.iter_mut().for_each(|v| *v = -*v);
                row.1 = row.1.map(|s| -s);
                row.2 = -row.2;
            }
        }

        let n_slack = raw.iter().filter(|r| r.1.is_some()).count();
        let n_art = raw.iter().filter(|r| r.1 != Some(1.0)).count();
        let width = n + n_slack + n_art;
        let mut kinds = vec![ColKind::Structural; n];
        kinds.extend(std::iter::repeat_n(ColKind::Slack, n_slack));
        kinds.extend(std::iter::repeat_n(ColKind::Artificial, n_art));

        let mut rows = Vec::with_capacity(raw.len());
        let mut basis = Vec::with_capacity(raw.len());
        let (mut next_slack, mut next_art) = (n, n + n_slack);
        let mut scale: f64 = 1.0;
        for (coeffs, slack, rhs) in raw {
            let mut row = vec![0.0; width + 1];
            row[..n].copy_from_slice(&coeffs);
            row[width] = rhs;
            scale = scale.max(rhs.abs());
            if let Some(s) = slack {
                row[next_slack] = s;
                if s == 1.0 {
                    basis.push(next_slack);
                }
                next_slack += 1;
            }
            if slack != Some(1.0) {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            rows.push(row);
        }
        Self {
            rows,
            kinds,
            basis,
            n_struct: n,
            scale,
        }
    }

    fn width(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximises `cost . columns` over the allowed columns. Returns false
    /// if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(ColKind) -> bool) -> Result<bool> {
        let width = self.width();
        let max_iter = 50_000 + 100 * (width + self.rows.len());
        for _ in 0..max_iter {
            // reduced cost d_j = c_j - c_B B^-1 A_j; enter on the first d_j > 0.
            let entering = (0..width).find(|&j| {
                if !allowed(self.kinds[j]) || self.basis.contains(&j) {
                    return false;
                }
                let zj: f64 = self
                    .rows
                    .iter()
                    .zip(&self.basis)
                    .map(|(row, &b)| cost[b] * row[j])
                    .sum();
                cost[j] - zj > COST_EPS
            });
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_EPS {
                    let ratio = row[width] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }

    /// Drives artificial variables to zero. Returns false if infeasible.
    fn phase_one(&mut self) -> Result<bool> {
        let width = self.width();
        let cost: Vec<f64> = self
            .kinds
            .iter()
            .map(|&k| if k == ColKind::Artificial { -1.0 } else { 0.0 })
            .collect();
        if cost.iter().all(|&c| c == 0.0) {
            return Ok(true);
        }
        self.optimize(&cost, |_| true)?;
        let residual: f64 = self
            .rows
            .iter()
            .zip(&self.basis)
            .filter(|(_, &b)| self.kinds[b] == ColKind::Artificial)
            .map(|(row, _)| row[width])
            .sum();
        if residual > 1e-9 * self.scale {
            return Ok(false);
        }
        // Pivot remaining (zero-valued) artificials out of the basis; rows
        // with no usable column are redundant and dropped.
        let mut r = 0;
        while r < self.rows.len() {
            if self.kinds[self.basis[r]] == ColKind::Artificial {
                let col = (0..width).find(|&j| {
                    self.kinds[j] != ColKind::Artificial && self.rows[r][j].abs() > 1e-9
                });
                match col {
                    Some(c) => {
                        self.pivot(r, c);
                        r += 1;
                    }
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
        Ok(true)
    }

    fn phase_two(&mut self, objective: &[f64]) -> Result<bool> {
        let mut cost = vec![0.0; self.width()];
        cost[..self.n_struct].copy_from_slice(objective);
        self.optimize(&cost, |k| k != ColKind::Artificial)
    }

    fn primal(&self) -> Vec<f64> {
        let width = self.width();
        let mut y = vec![0.0; self.n_struct];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n_struct {
                y[b] = row[width].max(0.0);
            }
        }
        y
    }
}
