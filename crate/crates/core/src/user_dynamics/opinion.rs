//! Scalar opinion dynamics driven by the recommendation each user receives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::random::RandomSource;

/// `(1 - alpha) x + alpha r`.
pub fn opinion_step(x: f64, r: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&r) {
        return invalid(format!("opinion {x} and recommendation {r} must lie in [0, 1]"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha = {alpha} outside (0, 1)"));
    }
    Ok(((1.0 - alpha) * x + alpha * r).clamp(0.0, 1.0))
}

/// 1 for `x > 0.5`, else 0.
pub fn aligned_policy(x: f64) -> f64 {
    if x > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Aligned content with probability `1 - epsilon`, otherwise a uniform draw.
///
/// Consumes one uniform to pick the branch and a second only in the diverse
/// branch.
pub fn diverse_policy(x: f64, epsilon: f64, rng: &mut RandomSource) -> f64 {
    if rng.uniform() < epsilon {
        rng.uniform()
    } else {
        aligned_policy(x)
    }
}

pub fn engagement(x: f64, r: f64) -> f64 {
    x * r
}

/// Population variance of opinions; 0 at consensus, 0.25 for an even 0/1 split.
pub fn polarization_metric(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return invalid("polarization of an empty population");
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    Ok(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// A share of users whose initial opinion is uniform on `[low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSplit {
    pub fraction: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpinionParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub n_users: usize,
    pub horizon: usize,
    pub group_splits: Vec<GroupSplit>,
}

impl OpinionParams {
    /// Half the users start on `[0.5, 0.7)`, half on `[0.3, 0.5)`, alpha 0.1.
    pub fn two_camps(epsilon: f64, n_users: usize, horizon: usize) -> Self {
        Self {
            alpha: 0.1,
            epsilon,
            n_users,
            horizon,
            group_splits: vec![
                GroupSplit { fraction: 0.5, low: 0.5, high: 0.7 },
                GroupSplit { fraction: 0.5, low: 0.3, high: 0.5 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return invalid(format!("epsilon = {} outside [0, 1]", self.epsilon));
        }
        if self.n_users == 0 {
            return invalid("n_users must be positive");
        }
        if self.group_splits.is_empty() {
            return invalid("at least one group split is required");
        }
        let total: f64 = self.group_splits.iter().map(|g| g.fraction).sum();
        if (total - 1.0).abs() > 1e-9 || self.group_splits.iter().any(|g| g.fraction < 0.0) {
            return invalid(format!("group fractions sum to {total}, expected 1"));
        }
        for g in &self.group_splits {
            if !(0.0 <= g.low && g.low < g.high && g.high <= 1.0) {
                return invalid(format!("initial range [{}, {}) not inside [0, 1]", g.low, g.high));
            }
        }
        Ok(())
    }

    /// Users per split: `round(fraction * n)`, the last split takes the rest.
    pub fn split_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.group_splits.len());
        let mut left = self.n_users;
        for (k, g) in self.group_splits.iter().enumerate() {
            let size = if k + 1 == self.group_splits.len() {
                left
            } else {
                ((g.fraction * self.n_users as f64).round() as usize).min(left)
            };
            sizes.push(size);
            left -= size;
        }
        sizes
    }

    /// Draws initial opinions split by split, in user order.
    pub fn initial_opinions(&self, rng: &mut RandomSource) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_users);
        for (g, size) in self.group_splits.iter().zip(self.split_sizes()) {
            x.extend((0..size).map(|_| rng.uniform_in(g.low, g.high)));
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionTrajectory {
    /// `x[t][u]` for `t = 0..=horizon`.
    pub x: Vec<Vec<f64>>,
    /// `engagement[t][u]` realized in step `t` (from `x[t]`), `t < horizon`.
    pub engagement: Vec<Vec<f64>>,
    /// Mean over users of `engagement[t]`.
    pub mean_engagement: Vec<f64>,
    /// Polarization of `x[t]`, `t = 0..=horizon`.
    pub polarization: Vec<f64>,
}

impl OpinionTrajectory {
    pub fn final_opinions(&self) -> &[f64] {
        self.x.last().expect("trajectory holds the initial state")
    }

    /// Mean over steps of the per-step mean engagement (0 for horizon 0).
    pub fn time_averaged_engagement(&self) -> f64 {
        if self.mean_engagement.is_empty() {
            return 0.0;
        }
        self.mean_engagement.iter().sum::<f64>() / self.mean_engagement.len() as f64
    }

    pub fn final_polarization(&self) -> f64 {
        *self.polarization.last().expect("trajectory holds the initial state")
    }
}

/// Draws initial opinions, then for every step and every user (in index
/// order) draws a recommendation, records its engagement and updates.
pub fn run_opinion_sim(params: &OpinionParams, rng: &mut RandomSource) -> Result<OpinionTrajectory> {
    params.validate()?;
    let x0 = params.initial_opinions(rng);
    simulate_from(params, x0, rng)
}

/// Runs the dynamics from given initial opinions.
pub fn simulate_from(
    params: &OpinionParams,
    x0: Vec<f64>,
    rng: &mut RandomSource,
) -> Result<OpinionTrajectory> {
    let mut traj = OpinionTrajectory {
        polarization: vec![polarization_metric(&x0)?],
        x: vec![x0],
        engagement: Vec::with_capacity(params.horizon),
        mean_engagement: Vec::with_capacity(params.horizon),
    };
    for _ in 0..params.horizon {
        let current = traj.x.last().expect("non-empty");
        let mut next = Vec::with_capacity(current.len());
        let mut eng = Vec::with_capacity(current.len());
        for &x in current {
            let r = diverse_policy(x, params.epsilon, rng);
            eng.push(engagement(x, r));
            next.push(opinion_step(x, r, params.alpha)?);
        }
        traj.mean_engagement.push(eng.iter().sum::<f64>() / eng.len() as f64);
        traj.polarization.push(polarization_metric(&next)?);
        traj.engagement.push(eng);
        traj.x.push(next);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffParams {
    pub alpha: f64,
    pub n_users: usize,
    pub horizon: usize,
    pub trials: usize,
    pub group_splits: Vec<GroupSplit>,
}

impl Default for TradeoffParams {
    fn default() -> Self {
        let base = OpinionParams::two_camps(0.0, 100, 30);
        Self {
            alpha: base.alpha,
            n_users: base.n_users,
            horizon: base.horizon,
            trials: 200,
            group_splits: base.group_splits,
        }
    }
}

impl TradeoffParams {
    pub fn at(&self, epsilon: f64) -> OpinionParams {
        OpinionParams {
            alpha: self.alpha,
            epsilon,
            n_users: self.n_users,
            horizon: self.horizon,
            group_splits: self.group_splits.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub epsilon: f64,
    pub mean_eng: f64,
    pub sd_eng: f64,
    pub mean_pol: f64,
    pub sd_pol: f64,
}

/// Monte Carlo engagement/polarization per epsilon.
///
/// Trial `k` uses the stream `master.derive(k)` at every epsilon, so grid
/// points share initial opinions (common random numbers). Trials run in
/// parallel and are reduced in trial order.
pub fn tradeoff_sweep(
    epsilon_grid: &[f64],
    params: &TradeoffParams,
    master: &RandomSource,
) -> Result<Vec<TradeoffRow>> {
    if params.trials == 0 {
        return invalid("tradeoff sweep needs at least one trial");
    }
    epsilon_grid
        .iter()
        .map(|&epsilon| {
            let p = params.at(epsilon);
            p.validate()?;
            let runs: Vec<(f64, f64)> = (0..params.trials)
                .into_par_iter()
                .map(|k| {
                    let traj = run_opinion_sim(&p, &mut master.derive(k as u64))?;
                    Ok((traj.time_averaged_engagement(), traj.final_polarization()))
                })
                .collect::<Result<_>>()?;
            let (mean_eng, sd_eng) = mean_sd(runs.iter().map(|r| r.0));
            let (mean_pol, sd_pol) = mean_sd(runs.iter().map(|r| r.1));
            Ok(TradeoffRow { epsilon, mean_eng, sd_eng, mean_pol, sd_pol })
        })
        .collect()
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_examples() {
        assert_abs_diff_eq!(opinion_step(0.6, 1.0, 0.1).unwrap(), 0.64, epsilon = 1e-15);
        assert_eq!(opinion_step(1.0, 1.0, 0.37).unwrap(), 1.0);
        assert_abs_diff_eq!(opinion_step(0.5, 0.0, 0.2).unwrap(), 0.4, epsilon = 1e-15);
        assert!(opinion_step(1.2, 0.0, 0.1).is_err());
        assert!(opinion_step(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn aligned_boundary() {
        assert_eq!(aligned_policy(0.51), 1.0);
        assert_eq!(aligned_policy(0.5), 0.0);
        assert_eq!(aligned_policy(0.3), 0.0);
    }

    #[test]
    fn diverse_with_zero_epsilon_is_aligned() {
        let mut rng = RandomSource::new(9);
        for k in 0..100 {
            let x = k as f64 / 99.0;
            assert_eq!(diverse_policy(x, 0.0, &mut rng), aligned_policy(x));
        }
    }

    #[test]
    fn diverse_with_full_epsilon_is_uniform() {
        let mut rng = RandomSource::new(10);
        let mean = (0..10_000).map(|_| diverse_policy(0.9, 1.0, &mut rng)).sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.015, "{mean}");
    }

    #[test]
    fn diverse_hits_aligned_at_one_minus_epsilon() {
        let mut rng = RandomSource::new(11);
        let ones = (0..10_000).filter(|_| diverse_policy(0.9, 0.2, &mut rng) == 1.0).count();
        assert!((7_800..=8_200).contains(&ones), "{ones}");
    }

    #[test]
    fn engagement_examples() {
        assert_eq!(engagement(1.0, 1.0), 1.0);
        assert_eq!(engagement(0.7, 0.0), 0.0);
        assert_abs_diff_eq!(engagement(0.6, 0.5), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn polarization_examples() {
        assert_eq!(polarization_metric(&[0.5; 10]).unwrap(), 0.0);
        assert_eq!(polarization_metric(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 0.25);
        assert_eq!(polarization_metric(&[0.3; 3]).unwrap(), 0.0);
        assert!(polarization_metric(&[]).is_err());
    }

    #[test]
    fn split_sizes_cover_population() {
        let mut p = OpinionParams::two_camps(0.0, 7, 1);
        assert_eq!(p.split_sizes(), vec![4, 3]);
        p.n_users = 100;
        assert_eq!(p.split_sizes(), vec![50, 50]);
    }

    #[test]
    fn extreme_user_stays_put() {
        let p = OpinionParams::two_camps(0.0, 1, 50);
        let traj = simulate_from(&p, vec![1.0], &mut RandomSource::new(0)).unwrap();
        assert!(traj.x.iter().all(|x| x[0] == 1.0));
    }

    #[test]
    fn aligned_dynamics_split_to_extremes() {
        let p = OpinionParams::two_camps(0.0, 40, 200);
        let x0 = p.initial_opinions(&mut RandomSource::new(4));
        let traj = run_opinion_sim(&p, &mut RandomSource::new(4)).unwrap();
        for (start, end) in x0.iter().zip(traj.final_opinions()) {
            let target = if *start > 0.5 { 1.0 } else { 0.0 };
            assert!((end - target).abs() < 1e-3);
        }
    }

    #[test]
    fn horizon_zero_keeps_initial_state() {
        let p = OpinionParams::two_camps(0.3, 10, 0);
        let traj = run_opinion_sim(&p, &mut RandomSource::new(2)).unwrap();
        assert_eq!(traj.x.len(), 1);
        assert_eq!(traj.time_averaged_engagement(), 0.0);
    }

    #[test]
    fn sweep_matches_single_runs() {
        let params = TradeoffParams { trials: 5, horizon: 10, n_users: 20, ..Default::default() };
        let master = RandomSource::new(77);
        let rows = tradeoff_sweep(&[0.0], &params, &master).unwrap();
        let engs: Vec<f64> = (0..5)
            .map(|k| run_opinion_sim(&params.at(0.0), &mut master.derive(k)).unwrap().time_averaged_engagement())
            .collect();
        assert_eq!(rows[0].mean_eng, engs.iter().sum::<f64>() / 5.0);
    }

    #[test]
    fn mean_sd_of_known_values() {
        let (m, s) = mean_sd([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert_abs_diff_eq!(s, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }
}
