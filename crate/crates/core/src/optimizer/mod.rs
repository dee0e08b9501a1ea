//! Linear programming, Birkhoff-von Neumann decomposition and the
//! fairness-constrained ranking pipeline built on them.

pub mod bvn;
pub mod lp;
pub mod matching;
pub mod ranking;

pub use bvn::{bvn_decompose, sample_ranking, BirkhoffDecomposition, BirkhoffTerm, SUPPORT_TOL, TOL_BVN};
pub use lp::{solve_lp, DenseSimplex, LinearProgram, LpSolution, LpSolver, LpStatus, TOL_LP};
pub use ranking::{
    assemble_ranking_lp, fair_rank, fair_rank_with, ConstraintKind, FairRanking, FairnessConstraint,
};
