//! Discounted long-horizon policy search over group exposure shares.
//!
//! The state `v` holds the engaged fraction of each user group. A policy maps
//! the state to exposure shares `beta` on the simplex; dynamics and reward
//! are pluggable through [`Dynamics`] and [`Reward`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::creators::sigmoid;
use crate::error::{invalid, Result};

/// `v_{t+1} = f(v_t, beta_t)`.
pub trait Dynamics: Sync {
    fn step(&self, v: &[f64], beta: &[f64]) -> Vec<f64>;
}

/// Per-step reward `U(v_t, beta_t)`.
pub trait Reward: Sync {
    fn reward(&self, v: &[f64], beta: &[f64]) -> f64;
}

/// `clamp((1 - eta) v_j + eta sigmoid(kappa_f (beta_j - theta_f)))`.
pub fn default_dynamics(v: &[f64], beta: &[f64], eta: f64, theta_f: f64, kappa_f: f64) -> Vec<f64> {
    v.iter()
        .zip(beta)
        .map(|(v, b)| ((1.0 - eta) * v + eta * sigmoid(kappa_f * (b - theta_f))).clamp(0.0, 1.0))
        .collect()
}

/// `sum_j n_j v_j q_j beta_j`.
pub fn default_reward(v: &[f64], beta: &[f64], group_sizes: &[f64], interest: &[f64]) -> f64 {
    v.iter()
        .zip(beta)
        .zip(group_sizes.iter().zip(interest))
        .map(|((v, b), (n, q))| n * v * q * b)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    SigmoidRelaxation { eta: f64, theta_f: f64, kappa_f: f64 },
}

impl Dynamics for DynamicsSpec {
    fn step(&self, v: &[f64], beta: &[f64]) -> Vec<f64> {
        match *self {
            Self::SigmoidRelaxation { eta, theta_f, kappa_f } => default_dynamics(v, beta, eta, theta_f, kappa_f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardSpec {
    ActivityInterest { group_sizes: Vec<f64>, interest: Vec<f64> },
}

impl Reward for RewardSpec {
    fn reward(&self, v: &[f64], beta: &[f64]) -> f64 {
        match self {
            Self::ActivityInterest { group_sizes, interest } => default_reward(v, beta, group_sizes, interest),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub horizon: usize,
    pub gamma: f64,
    pub dynamics: DynamicsSpec,
    pub reward: RewardSpec,
    /// Simplex grid spacing for the static policy search.
    pub grid_step: f64,
}

impl Default for HorizonSpec {
    /// Two equal groups, the first starting disengaged.
    fn default() -> Self {
        Self {
            horizon: 60,
            gamma: 0.95,
            dynamics: DynamicsSpec::SigmoidRelaxation { eta: 0.3, theta_f: 0.3, kappa_f: 20.0 },
            reward: RewardSpec::ActivityInterest { group_sizes: vec![100.0, 100.0], interest: vec![1.0, 1.0] },
            grid_step: 0.05,
        }
    }
}

impl HorizonSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return invalid(format!("gamma = {} outside [0, 1)", self.gamma));
        }
        let DynamicsSpec::SigmoidRelaxation { eta, theta_f, kappa_f } = self.dynamics;
        if !(0.0..=1.0).contains(&eta) || !theta_f.is_finite() || !kappa_f.is_finite() {
            return invalid("dynamics need eta in [0, 1] and finite theta_f, kappa_f");
        }
        let RewardSpec::ActivityInterest { group_sizes, interest } = &self.reward;
        if group_sizes.len() != m || interest.len() != m {
            return invalid(format!("reward parameters must have one entry per group ({m})"));
        }
        grid_divisions(self.grid_step)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub value: f64,
    /// `v_t` for `t = 0..=T`.
    pub v: Vec<Vec<f64>>,
    /// `beta_t` for `t = 0..=T`.
    pub beta: Vec<Vec<f64>>,
    /// Undiscounted reward for `t = 0..=T`.
    pub reward: Vec<f64>,
}

impl Rollout {
    pub fn terminal(&self) -> &[f64] {
        self.v.last().expect("rollout holds v_0")
    }
}

fn check_state(v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return invalid("engagement state must be non-empty with entries in [0, 1]");
    }
    Ok(())
}

fn check_simplex(beta: &[f64]) -> Result<()> {
    let s: f64 = beta.iter().sum();
    if beta.iter().any(|b| *b < 0.0) || (s - 1.0).abs() > 1e-9 {
        return invalid(format!("exposure shares {beta:?} not on the simplex"));
    }
    Ok(())
}

/// `sum_{t=0}^{T} gamma^t U(v_t, beta(v_t))` with `v_{t+1} = f(v_t, beta(v_t))`.
pub fn rollout_with(
    policy: impl Fn(&[f64]) -> Vec<f64>,
    dynamics: &impl Dynamics,
    reward: &impl Reward,
    horizon: usize,
    gamma: f64,
    v0: &[f64],
) -> Result<Rollout> {
    check_state(v0)?;
    let mut out = Rollout { value: 0.0, v: Vec::new(), beta: Vec::new(), reward: Vec::new() };
    let mut v = v0.to_vec();
    let mut discount = 1.0;
    for t in 0..=horizon {
        let beta = policy(&v);
        check_simplex(&beta)?;
        let r = reward.reward(&v, &beta);
        out.value += discount * r;
        discount *= gamma;
        let next = (t < horizon).then(|| dynamics.step(&v, &beta));
        out.v.push(v);
        out.beta.push(beta);
        out.reward.push(r);
        match next {
            Some(n) => v = n,
            None => break,
        }
    }
    Ok(out)
}

pub fn rollout(policy: impl Fn(&[f64]) -> Vec<f64>, spec: &HorizonSpec, v0: &[f64]) -> Result<Rollout> {
    spec.validate(v0.len())?;
    rollout_with(policy, &spec.dynamics, &spec.reward, spec.horizon, spec.gamma, v0)
}

pub fn rollout_static(beta: &[f64], spec: &HorizonSpec, v0: &[f64]) -> Result<Rollout> {
    rollout(|_| beta.to_vec(), spec, v0)
}

/// Vertex `e_j` maximizing the immediate reward at `v` (ties to the lowest `j`).
/// For rewards linear in `beta` this is the simplex maximum.
pub fn myopic_policy(reward: &impl Reward, v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let vertex = |j: usize| {
        let mut b = vec![0.0; m];
        b[j] = 1.0;
        b
    };
    let mut best = 0;
    let mut best_r = reward.reward(v, &vertex(0));
    for j in 1..m {
        let r = reward.reward(v, &vertex(j));
        if r > best_r {
            best = j;
            best_r = r;
        }
    }
    vertex(best)
}

fn grid_divisions(h: f64) -> Result<usize> {
    let k = (1.0 / h).round();
    if !(h > 0.0 && h <= 1.0) || (k * h - 1.0).abs() > 1e-9 {
        return invalid(format!("grid step {h} does not divide 1"));
    }
    Ok(k as usize)
}

/// Simplex points with spacing `h`, in ascending lexicographic order.
pub fn simplex_grid(m: usize, h: f64) -> Result<Vec<Vec<f64>>> {
    let k = grid_divisions(h)?;
    if m == 0 {
        return invalid("simplex needs at least one coordinate");
    }
    let mut out = Vec::new();
    let mut parts = vec![0usize; m];
    fn fill(j: usize, left: usize, k: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if j + 1 == parts.len() {
            parts[j] = left;
            out.push(parts.iter().map(|&p| p as f64 / k as f64).collect());
            return;
        }
        for c in 0..=left {
            parts[j] = c;
            fill(j + 1, left - c, k, parts, out);
        }
    }
    fill(0, k, k, &mut parts, &mut out);
    Ok(out)
}

/// Best static policy on the simplex grid (ties to the lexicographically
/// smallest `beta`). Grid points are rolled out in parallel.
pub fn grid_search_policy(spec: &HorizonSpec, v0: &[f64]) -> Result<(Vec<f64>, f64)> {
    spec.validate(v0.len())?;
    let grid = simplex_grid(v0.len(), spec.grid_step)?;
    let values: Vec<f64> = grid
        .par_iter()
        .map(|b| rollout_static(b, spec, v0).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok((grid[best].clone(), values[best]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub myopic: Rollout,
    pub farsighted_beta: Vec<f64>,
    pub farsighted: Rollout,
    pub terminal_myopic: Vec<f64>,
    pub terminal_farsighted: Vec<f64>,
    /// Farsighted minus myopic discounted value.
    pub value_gap: f64,
}

/// Closed-loop myopic rollout against the best static grid policy.
pub fn compare(spec: &HorizonSpec, v0: &[f64]) -> Result<CompareReport> {
    let myopic = rollout(|v| myopic_policy(&spec.reward, v), spec, v0)?;
    let (beta, _) = grid_search_policy(spec, v0)?;
    let farsighted = rollout_static(&beta, spec, v0)?;
    Ok(CompareReport {
        terminal_myopic: myopic.terminal().to_vec(),
        terminal_farsighted: farsighted.terminal().to_vec(),
        value_gap: farsighted.value - myopic.value,
        farsighted_beta: beta,
        myopic,
        farsighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sigmoid_dyn(eta: f64) -> DynamicsSpec {
        DynamicsSpec::SigmoidRelaxation { eta, theta_f: 0.3, kappa_f: 20.0 }
    }

    #[test]
    fn dynamics_examples() {
        let v = default_dynamics(&[0.9], &[0.3], 0.25, 0.3, 20.0);
        assert_abs_diff_eq!(v[0], 0.75 * 0.9 + 0.25 * 0.5, epsilon = 1e-15);
        assert_eq!(default_dynamics(&[0.4, 0.7], &[0.9, 0.1], 0.0, 0.3, 20.0), vec![0.4, 0.7]);
        let mut v = vec![0.0];
        for _ in 0..200 {
            v = default_dynamics(&v, &[1.0], 0.5, 0.3, 500.0);
        }
        assert!(v[0] > 1.0 - 1e-12);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(default_reward(&[0.0, 0.0], &[0.5, 0.5], &[3.0, 4.0], &[1.0, 1.0]), 0.0);
        assert_eq!(default_reward(&[0.6], &[1.0], &[10.0], &[0.5]), 3.0);
        for b in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(default_reward(&[1.0, 1.0], &[b, 1.0 - b], &[1.0, 1.0], &[1.0, 1.0]), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_discount_keeps_first_reward() {
        let spec = HorizonSpec { gamma: 0.0, ..Default::default() };
        let r = rollout_static(&[0.5, 0.5], &spec, &[0.2, 0.8]).unwrap();
        assert_eq!(r.value, 50.0);
    }

    #[test]
    fn frozen_dynamics_geometric_series() {
        let spec = HorizonSpec { dynamics: sigmoid_dyn(0.0), horizon: 10, gamma: 0.9, ..Default::default() };
        let r = rollout_static(&[0.25, 0.75], &spec, &[0.2, 0.8]).unwrap();
        let u = 100.0 * 0.2 * 0.25 + 100.0 * 0.8 * 0.75;
        assert_abs_diff_eq!(r.value, u * (1.0 - 0.9f64.powi(11)) / 0.1, epsilon = 1e-9);
        assert_eq!(r.v.len(), 11);
    }

    #[test]
    fn myopic_picks_best_vertex() {
        let reward = RewardSpec::ActivityInterest { group_sizes: vec![1.0, 1.0], interest: vec![1.0, 1.0] };
        assert_eq!(myopic_policy(&reward, &[0.9, 0.1]), vec![1.0, 0.0]);
        assert_eq!(myopic_policy(&reward, &[0.4, 0.4]), vec![1.0, 0.0]);
        assert_eq!(myopic_policy(&reward, &[0.1, 0.4]), vec![0.0, 1.0]);
    }

    #[test]
    fn grid_is_lexicographic_simplex() {
        let g = simplex_grid(3, 0.5).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(g[5], vec![1.0, 0.0, 0.0]);
        assert_eq!(simplex_grid(2, 0.05).unwrap().len(), 21);
        assert!(simplex_grid(2, 0.3).is_err());
    }

    #[test]
    fn frozen_grid_optimum_is_vertex() {
        let spec = HorizonSpec { dynamics: sigmoid_dyn(0.0), ..Default::default() };
        let (beta, _) = grid_search_policy(&spec, &[0.2, 0.8]).unwrap();
        assert_eq!(beta, vec![0.0, 1.0]);
    }

    #[test]
    fn relabeling_groups_keeps_value() {
        let spec = HorizonSpec::default();
        for b in [0.0, 0.2, 0.45, 0.5] {
            let a = rollout_static(&[b, 1.0 - b], &spec, &[0.3, 0.6]).unwrap();
            let c = rollout_static(&[1.0 - b, b], &spec, &[0.6, 0.3]).unwrap();
            assert_abs_diff_eq!(a.value, c.value, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = HorizonSpec { gamma: 1.0, ..Default::default() };
        assert!(rollout_static(&[0.5, 0.5], &spec, &[0.2, 0.8]).is_err());
        let spec = HorizonSpec::default();
        assert!(rollout_static(&[0.6, 0.6], &spec, &[0.2, 0.8]).is_err());
        assert!(rollout_static(&[0.5, 0.5], &spec, &[1.2, 0.8]).is_err());
    }
}
