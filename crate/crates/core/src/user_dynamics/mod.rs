//! User-side feedback loops: opinion polarization under aligned or
//! diversified recommendations, and representation bias from churn with
//! homophilous replacement.

pub mod opinion;
pub mod population;

pub use opinion::{
    aligned_policy, diverse_policy, engagement, opinion_step, polarization_metric, run_opinion_sim,
    tradeoff_sweep, GroupSplit, OpinionParams, OpinionTrajectory, TradeoffParams, TradeoffRow,
};
pub use population::{population_step, run_population_sim, PopulationParams, PopulationState};
