//! Propagation engines: a host-level Monte Carlo estimator of early-stage
//! infection rates and a discrete-time mean-field model of full outbreaks.

mod dynamics;
mod early;

pub use dynamics::{
    propagate, propagate_with, time_to_fraction, EpidemicConfig, EpidemicTrace, InitialInfection,
    Protection,
};
pub use early::{
    estimate_infection_rate, estimate_infection_rate_with, estimate_mss_full,
    estimate_mss_full_with, run_rng, EarlyStageConfig, EarlyStageResult, MssMode, VulnerableIndex,
};
