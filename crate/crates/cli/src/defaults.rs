//! Every default parameter value, in one place. Bump [`VERSION`] when any
//! value here changes; it is echoed into each manifest.

use fairloop_core::controller::ControlMode;
use fairloop_core::creators::{MarketConstraint, MarketSpec};
use fairloop_core::longterm::HorizonSpec;
use fairloop_core::optimizer::ConstraintKind;
use fairloop_core::user_dynamics::{OpinionParams, PopulationParams, TradeoffParams};
use serde_json::{json, Value};

use crate::config::{
    ControllerConfig, CreatorsConfig, Experiment, LongtermConfig, RankConfig, Source, TradeoffConfig,
};

pub const VERSION: &str = "1";

pub const SEED: u64 = 20240601;

pub fn tradeoff() -> TradeoffConfig {
    let p = TradeoffParams::default();
    TradeoffConfig {
        epsilon_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
        alpha: p.alpha,
        n_users: p.n_users,
        horizon: p.horizon,
        trials: p.trials,
        group_splits: p.group_splits,
    }
}

pub fn opinion() -> OpinionParams {
    OpinionParams::two_camps(0.0, 100, 200)
}

pub fn population() -> PopulationParams {
    PopulationParams { n: 1000, init_counts: [495, 505], rec_prob: [0.4, 0.5], horizon: 200 }
}

pub fn creators() -> CreatorsConfig {
    CreatorsConfig { market: MarketSpec::default(), constraint: MarketConstraint::Exposure, epsilon_grid: None }
}

/// Items 0, 1 form group 0 and item 2 group 1. Odd steps favour group 0,
/// even steps group 1; only the top slot is seen.
pub fn alternating_stream(horizon: usize) -> Vec<Vec<Vec<f64>>> {
    (1..=horizon)
        .map(|t| if t % 2 == 1 { vec![vec![0.9, 0.7, 0.2]] } else { vec![vec![0.3, 0.2, 0.8]] })
        .collect()
}

pub fn controller() -> ControllerConfig {
    ControllerConfig {
        stream: Source::Inline(alternating_stream(12)),
        groups: vec![0, 0, 1],
        pi: vec![1.0, 0.0, 0.0],
        targets: vec![4.0, 7.0],
        gain: 1.0,
        mode: ControlMode::PControl,
    }
}

pub fn longterm() -> LongtermConfig {
    let s = HorizonSpec::default();
    LongtermConfig {
        v0: vec![0.2, 0.8],
        horizon: s.horizon,
        gamma: s.gamma,
        dynamics: s.dynamics,
        reward: s.reward,
        grid_step: s.grid_step,
    }
}

/// The creator market as a ranking problem: user groups weighted by size,
/// each creator its own group, only the top slot counts.
pub fn rank() -> RankConfig {
    let market = MarketSpec::default();
    RankConfig {
        relevance: Source::Inline(market.relevance),
        groups: Source::Inline(vec![0, 1, 2]),
        constraint: ConstraintKind::ExposureFloor,
        epsilon: vec![0.0],
        weights: Some(market.group_sizes),
        pi: None,
        top_k: Some(1),
    }
}

pub fn params(experiment: Experiment) -> Value {
    let v = match experiment {
        Experiment::Controller => serde_json::to_value(controller()),
        Experiment::Creators => serde_json::to_value(creators()),
        Experiment::Longterm => serde_json::to_value(longterm()),
        Experiment::Opinion => serde_json::to_value(opinion()),
        Experiment::Population => serde_json::to_value(population()),
        Experiment::Rank => serde_json::to_value(rank()),
        Experiment::Tradeoff => serde_json::to_value(tradeoff()),
    };
    v.expect("defaults serialize")
}

/// The whole defaults table, as echoed into manifests.
pub fn table() -> Value {
    let mut params = serde_json::Map::new();
    for e in Experiment::ALL {
        params.insert(e.name().to_string(), self::params(e));
    }
    json!({ "version": VERSION, "seed": SEED, "params": params })
}
