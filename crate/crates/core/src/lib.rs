//! Generate-then-optimize multi-objective batch Bayesian optimization over
//! discrete candidate pools.
//!
//! Each iteration fits independent Gaussian processes per objective, builds a
//! finite candidate pool, and picks a batch by ranking each candidate's
//! Monte Carlo probability of attaining the pool-wide maximum hypervolume
//! improvement (qPMHI). Because those events partition the improving draws,
//! the batch score is additive and the top-q ranking is its exact maximizer.
//!
//! Modules:
//! - [`pareto`]: dominance, front maintenance, exact hypervolume, metrics.
//! - [`surrogate`]: GP regression, joint posterior sampling.
//! - [`acquisition`]: qPMHI and its variants, plus qEHVI / Thompson / random baselines.
//! - [`generation`]: candidate pools (static files, genetic proposer, constraints).
//! - [`campaign`]: the optimization loop, oracles, checkpoints.
//! - [`bench`]: acquisition ablations across seeds.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod bench;
pub mod campaign;
pub mod error;
pub mod generation;
pub mod par;
pub mod pareto;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
pub use pareto::{dominates, ObjectiveVector, ParetoFront};
