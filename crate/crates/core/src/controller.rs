//! Fast-timescale exposure control over a finite horizon.
//!
//! A proportional controller adds a per-group boost equal to the gain times
//! how far the group's cumulative exposure trails its pro-rata target. The
//! dual-ascent form keeps one projected multiplier per group instead; with a
//! zero start and step size `gain * |U|` the two produce the same rankings.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::aggregate_utility;
use crate::optimizer::{fair_rank, FairnessConstraint, ConstraintKind};
use crate::random::RandomSource;
use crate::types::{GroupPartition, PositionWeights, RankedList, RelevanceMatrix};

/// Tolerance for end-of-horizon target checks.
pub const TOL_TRACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    /// Cumulative exposure per group.
    pub s: Vec<f64>,
    /// Completed steps; the current step is `steps_done + 1`.
    pub steps_done: usize,
    pub horizon: usize,
    pub targets: Vec<f64>,
    pub gain: f64,
}

impl TrackerState {
    pub fn new(targets: Vec<f64>, horizon: usize, gain: f64) -> Result<Self> {
        if horizon == 0 {
            return invalid("horizon must be positive");
        }
        if targets.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return invalid("targets must be finite and non-negative");
        }
        if !(gain >= 0.0 && gain.is_finite()) {
            return invalid(format!("gain = {gain} must be finite and non-negative"));
        }
        Ok(Self { s: vec![0.0; targets.len()], steps_done: 0, horizon, targets, gain })
    }

    /// Current step `t` in `1..=T` (or `T + 1` once exhausted).
    pub fn t(&self) -> usize {
        self.steps_done + 1
    }

    pub fn n_groups(&self) -> usize {
        self.targets.len()
    }

    /// `max(0, (t - 1)/T eps_j - s_j)` per group.
    pub fn tracking_error(&self) -> Vec<f64> {
        let frac = (self.t() - 1) as f64 / self.horizon as f64;
        self.targets
            .iter()
            .zip(&self.s)
            .map(|(e, s)| (frac * e - s).max(0.0))
            .collect()
    }

    /// Additive score boost per group at the current step.
    pub fn boosts(&self) -> Vec<f64> {
        self.tracking_error().into_iter().map(|d| self.gain * d).collect()
    }

    /// `max(0, eps_j - s_j)` per group.
    pub fn shortfall(&self) -> Vec<f64> {
        self.targets.iter().zip(&self.s).map(|(e, s)| (e - s).max(0.0)).collect()
    }

    pub fn targets_met(&self, tol: f64) -> bool {
        self.s.iter().zip(&self.targets).all(|(s, e)| *s >= e - tol)
    }
}

/// `r[u, i] + boost[group(i)]` for every user row.
pub fn boosted_scores(relevance: &RelevanceMatrix, groups: &GroupPartition, tracker: &TrackerState) -> Result<Vec<Vec<f64>>> {
    add_group_offsets(relevance, groups, &tracker.boosts())
}

fn add_group_offsets(relevance: &RelevanceMatrix, groups: &GroupPartition, offsets: &[f64]) -> Result<Vec<Vec<f64>>> {
    if offsets.len() != groups.n_groups() {
        return invalid(format!("{} targets for {} groups", offsets.len(), groups.n_groups()));
    }
    if groups.n_items() != relevance.n_items() {
        return invalid("group partition and relevance disagree on item count");
    }
    Ok((0..relevance.n_users())
        .map(|u| {
            relevance
                .row(u)
                .into_iter()
                .enumerate()
                .map(|(i, r)| r + offsets[groups.group_of(i)])
                .collect()
        })
        .collect())
}

/// Adds this step's exposure and advances the step counter.
pub fn tracker_update(tracker: &TrackerState, exposure: &[f64]) -> Result<TrackerState> {
    if tracker.steps_done >= tracker.horizon {
        return Err(Error::HorizonExhausted { t: tracker.t(), horizon: tracker.horizon });
    }
    if exposure.len() != tracker.n_groups() || exposure.iter().any(|e| !(*e >= 0.0)) {
        return invalid("exposure must be non-negative with one entry per group");
    }
    let mut next = tracker.clone();
    for (s, e) in next.s.iter_mut().zip(exposure) {
        *s += e;
    }
    next.steps_done += 1;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub step_size: f64,
}

impl DualState {
    pub fn zeros(m: usize, step_size: f64) -> Self {
        Self { lambda: vec![0.0; m], step_size }
    }
}

/// `lambda_j <- max(0, lambda_j + step (eps_j / T - exposure_j))`.
pub fn dual_ascent_step(dual: &DualState, exposure: &[f64], targets: &[f64], horizon: usize) -> Result<DualState> {
    if exposure.len() != dual.lambda.len() || targets.len() != dual.lambda.len() {
        return invalid("dual update needs one exposure and one target per group");
    }
    if horizon == 0 {
        return invalid("horizon must be positive");
    }
    let t = horizon as f64;
    let lambda = dual
        .lambda
        .iter()
        .zip(exposure.iter().zip(targets))
        .map(|(l, (e, eps))| (l + dual.step_size * (eps / t - e)).max(0.0))
        .collect();
    Ok(DualState { lambda, step_size: dual.step_size })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    PControl,
    DualAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// Per-group offset added to scores at this step.
    pub boost: Vec<f64>,
    pub rankings: Vec<RankedList>,
    /// Mean over this step's users of per-group exposure.
    pub exposure: Vec<f64>,
    /// Cumulative exposure after this step.
    pub s: Vec<f64>,
    /// Raw-relevance utility summed over this step's users.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRun {
    pub steps: Vec<StepRecord>,
    pub tracker: TrackerState,
    pub dual: Option<DualState>,
}

impl HorizonRun {
    pub fn total_utility(&self) -> f64 {
        self.steps.iter().map(|s| s.utility).sum()
    }
}

/// Mean over users of per-group exposure under `rankings`.
pub fn step_exposure(rankings: &[RankedList], groups: &GroupPartition, pi: &PositionWeights) -> Vec<f64> {
    let mut out = vec![0.0; groups.n_groups()];
    for r in rankings {
        for (k, &i) in r.items().iter().enumerate() {
            out[groups.group_of(i)] += pi.get(k);
        }
    }
    let n = rankings.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

fn check_stream(stream: &[RelevanceMatrix], groups: &GroupPartition, pi: &PositionWeights, horizon: usize) -> Result<()> {
    if stream.len() != horizon {
        return invalid(format!("stream has {} steps, horizon is {horizon}", stream.len()));
    }
    for (t, rel) in stream.iter().enumerate() {
        if rel.n_items() != groups.n_items() || rel.n_items() != pi.len() {
            return invalid(format!("step {} has {} items", t + 1, rel.n_items()));
        }
    }
    Ok(())
}

/// Ranks every user of every step by adjusted scores (ties to the lower
/// item index), measures exposure with `pi` and updates the controller.
pub fn run_horizon(
    stream: &[RelevanceMatrix],
    groups: &GroupPartition,
    pi: &PositionWeights,
    targets: &[f64],
    gain: f64,
    horizon: usize,
    mode: ControlMode,
) -> Result<HorizonRun> {
    check_stream(stream, groups, pi, horizon)?;
    let mut tracker = TrackerState::new(targets.to_vec(), horizon, gain)?;
    if targets.len() != groups.n_groups() {
        return invalid(format!("{} targets for {} groups", targets.len(), groups.n_groups()));
    }
    let mut dual = DualState::zeros(groups.n_groups(), gain);
    let mut steps = Vec::with_capacity(horizon);

    for rel in stream {
        let users = rel.n_users() as f64;
        let boost = match mode {
            ControlMode::PControl => tracker.boosts(),
            ControlMode::DualAscent => dual.lambda.iter().map(|l| l / users).collect(),
        };
        let scores = add_group_offsets(rel, groups, &boost)?;
        let rankings: Vec<RankedList> = scores.iter().map(|s| RankedList::by_scores(s)).collect();
        let exposure = step_exposure(&rankings, groups, pi);
        let utility = aggregate_utility(&rankings, rel, pi)?;
        if mode == ControlMode::DualAscent {
            dual.step_size = gain * users;
            dual = dual_ascent_step(&dual, &exposure, targets, horizon)?;
        }
        tracker = tracker_update(&tracker, &exposure)?;
        steps.push(StepRecord {
            t: tracker.steps_done,
            boost,
            rankings,
            exposure,
            s: tracker.s.clone(),
            utility,
        });
    }
    Ok(HorizonRun {
        steps,
        tracker,
        dual: (mode == ControlMode::DualAscent).then_some(dual),
    })
}

/// Per-step LP baseline: every step must deliver `eps_j / T` on its own.
/// Returns the expected utility of each step.
pub fn hard_floor_baseline(
    stream: &[RelevanceMatrix],
    groups: &GroupPartition,
    pi: &PositionWeights,
    targets: &[f64],
    horizon: usize,
) -> Result<Vec<f64>> {
    check_stream(stream, groups, pi, horizon)?;
    let floors: Vec<f64> = targets.iter().map(|e| e / horizon as f64).collect();
    let constraint = FairnessConstraint::new(ConstraintKind::ExposureFloor, floors)?;
    // The sampled rankings are discarded; only the exact objective is used.
    let mut rng = RandomSource::new(0);
    stream
        .iter()
        .map(|rel| {
            let w = vec![1.0; rel.n_users()];
            Ok(fair_rank(rel, groups, pi, &constraint, &w, &mut rng)?.objective_value)
        })
        .collect()
}
