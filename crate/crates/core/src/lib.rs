//! K-best data association for hypothesis-oriented multiple hypothesis tracking.
//!
//! Costs are negative log-likelihoods; misses are implicit and cost zero.
//! [`ssp`] builds optimal associations by successive shortest paths,
//! [`kbest`] enumerates the K best with Murty's partitioning over a bounded
//! double-ended queue, and [`oracle`] provides brute-force ground truth.

pub mod association;
pub mod error;
pub mod experiments;
pub mod fusion;
pub mod gen;
pub mod gibbs;
pub mod kbest;
pub mod matrix;
pub mod oracle;
pub mod queue;
pub mod ssp;

pub use association::{
    association_nll, association_probability, validate_association, Association, HypothesisSet, Violation, MISS,
};
pub use error::{AssocError, Result};
pub use gen::{gate_matrix, gen_random_dense, min_sufficient_gate};
pub use gibbs::{gibbs_sample, SampleSummary};
pub use kbest::{kbest_mimo, kbest_single, KBest, KBestConfig, KBestStats, OutputEntry, OutputSet, Version};
pub use matrix::{build_cost, LikelihoodInputs, SparseCostMatrix};
pub use oracle::{enumerate_all, kbest_bruteforce, EnumerationResult};
pub use queue::SolutionQueue;
pub use ssp::{solve_optimal, Constraints, DualState, Matching, PathStatus, ScanMode, Solved, Solver, Target};
