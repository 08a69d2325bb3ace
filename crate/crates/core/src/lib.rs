//! Adversarial multi-armed bandits with stochastic side observations.
//!
//! Every non-chosen arm reveals its loss independently with an unknown
//! probability `r_t` (an Erdős–Rényi observation graph). The centerpiece is
//! the Exp3-Res learner ([`policies::PolicyKind::Exp3Res`]): exponential weights fed with loss
//! estimates whose importance weights are replaced by a truncated geometric
//! variable resampled from the other arms' realized observations, so `r_t`
//! never has to be known or estimated.
//!
//! Module map:
//! - [`types`]: arm indices, probability vectors, observation rounds, policy state.
//! - [`rng`]: seeded, splittable random streams.
//! - [`env`]: loss tables, `r_t` sequences, observation sampling.
//! - [`estimators`]: importance-weighted and resampled loss estimates, truncated
//!   geometric law and its moments.
//! - [`policies`]: the exponential-weights engine and the four learners.
//! - [`harness`]: episodes, experiments, regret aggregation, analytic bounds.
//! - [`verify`]: analytic-oracle and Monte Carlo self-checks.
//! - [`cli`]: command-line front end.

pub mod cli;
pub mod env;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod policies;
pub mod rng;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
