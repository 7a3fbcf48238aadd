//! Population distribution estimates from biased samples.
//!
//! A large self-selected sample gives a detailed but distorted histogram of
//! an observed variable. If the inclusion probabilities are known as a
//! function of the observed variable and of possibly unobserved selection
//! categories, and a few population moments are known from an independent
//! survey, the most probable population distribution is the maximum-entropy
//! distribution that reproduces both the moments and the sample histogram
//! once pushed through the selection function.
//!
//! * [`dist`]: grids, distributions, forward observation, entropy and the
//!   total-variation error.
//! * [`solver`]: the constrained maximum-entropy estimator, the pure-sample
//!   and pure-prior benchmarks, and the censored-selection variant.
//! * [`simgen`]: Gaussian-mixture population/sample replicas and the
//!   benchmark harness.
//! * [`sentiment`]: lexicon scoring and the corpus benchmark.
//! * [`report`]: benchmark summaries and their CSV/JSON/SVG output.
//! * [`cli`]: the `maxent-fusion` command-line front end.

pub mod cli;
pub mod csvio;
pub mod dist;
pub mod error;
pub mod report;
pub mod rng;
pub mod sentiment;
pub mod simgen;
pub mod solver;

pub use dist::{
    bin_samples, entropy, forward_observe, marginalize, tv_error, BinnedJoint, Grid, Marginal, ObservedHistogram,
    OutOfRange, SelectionFunction,
};
pub use error::{Error, Result};
pub use solver::{
    censored_estimate, dual_gradient, dual_objective, estimate_population, pure_prior_estimate, pure_sample_estimate,
    reconstruct_primal, solve_dual, CensoredEstimate, ConstraintSet, DualState, Estimate, MomentConstraint,
    SolverOptions,
};
