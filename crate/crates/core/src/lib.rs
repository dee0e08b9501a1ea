//! Fair ranking, recommender feedback-loop simulators and exposure
//! controllers.

pub mod controller;
pub mod creators;
pub mod error;
pub mod io;
pub mod longterm;
pub mod metrics;
pub mod optimizer;
pub mod random;
pub mod types;
pub mod user_dynamics;

pub use error::{Error, Result};
pub use random::{mix_seed, RandomSource};
pub use types::{
    GroupPartition, PositionWeights, RankedList, RelevanceMatrix, StochasticRankingPolicy, TOL_DS,
};
