//! Sequential estimation of the relative risk, odds ratio and their
//! logarithms from paired Bernoulli observations, with a guaranteed
//! (relative) mean-square error.
//!
//! The estimator transforms paired draws from the two populations into a
//! single Bernoulli stream whose odds equal the target ratio, then applies
//! two inverse-binomial-sampling phases to that stream. Samples are taken
//! conservatively in pairs: the unneeded half of each pair is banked and
//! reused, so the number of pairs equals the larger per-population
//! consumption.
//!
//! - [`population`]: observation sources and the pair-sampling ledger
//! - [`factory`]: the two probability transformations
//! - [`estimator`]: the two-phase sampling procedure and point estimates
//! - [`analysis`]: closed-form distributions, accuracy and efficiency bounds
//! - [`montecarlo`]: reproducible replication harness with standard errors

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod factory;
pub mod montecarlo;
mod numeric;
pub mod population;
pub mod rng;

pub use error::{Error, Result};
pub use estimator::{
    harmonic, point_estimate, required_successes, run_estimation, EstimationResult,
    EstimatorConfig, Session, TargetParameter,
};
pub use population::{PairedSampleLedger, Population, PopulationModel};
