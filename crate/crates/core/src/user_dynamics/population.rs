//! Churn with homophilous replacement.
//!
//! Users who do not receive a recommendation leave and are replaced at once.
//! A newcomer joins group 0 with probability equal to group 0's share at the
//! start of the step, so under-served groups shrink.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::random::RandomSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationParams {
    pub n: usize,
    pub init_counts: [usize; 2],
    /// Probability that a user of each group receives a recommendation.
    pub rec_prob: [f64; 2],
    pub horizon: usize,
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("population size must be positive");
        }
        if self.init_counts[0] + self.init_counts[1] != self.n {
            return invalid(format!("initial counts {:?} do not sum to n = {}", self.init_counts, self.n));
        }
        if self.rec_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid(format!("recommendation probabilities {:?} outside [0, 1]", self.rec_prob));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationState {
    /// Group (0 or 1) of every user slot.
    pub labels: Vec<u8>,
    pub t: usize,
}

impl PopulationState {
    /// Group 0 users first, then group 1.
    pub fn initial(params: &PopulationParams) -> Self {
        let [a, b] = params.init_counts;
        let mut labels = vec![0u8; a];
        labels.resize(a + b, 1);
        Self { labels, t: 0 }
    }

    pub fn counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&g| g == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// One synchronous step. Per user in slot order: draw whether it is served;
/// if not, draw the newcomer's group against the start-of-step share.
pub fn population_step(
    state: &PopulationState,
    params: &PopulationParams,
    rng: &mut RandomSource,
) -> PopulationState {
    let p0 = state.counts()[0] as f64 / state.n() as f64;
    let labels = state
        .labels
        .iter()
        .map(|&g| {
            if rng.bernoulli(params.rec_prob[g as usize]) {
                g
            } else if rng.bernoulli(p0) {
                0
            } else {
                1
            }
        })
        .collect();
    PopulationState { labels, t: state.t + 1 }
}

/// Group counts for `t = 0..=horizon`.
pub fn run_population_sim(params: &PopulationParams, rng: &mut RandomSource) -> Result<Vec<[usize; 2]>> {
    params.validate()?;
    let mut state = PopulationState::initial(params);
    let mut out = Vec::with_capacity(params.horizon + 1);
    out.push(state.counts());
    for _ in 0..params.horizon {
        state = population_step(&state, params, rng);
        out.push(state.counts());
    }
    Ok(out)
}
