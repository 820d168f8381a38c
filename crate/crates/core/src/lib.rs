//! Non-uniformity metrics for vulnerable-host distributions and the
//! infection-rate analytics of randomized scanning strategies.
//!
//! The crate is organised bottom-up:
//!
//! * [`addrspace`] models IPv4 addresses, `/l` prefix aggregation, host-list
//!   ingestion and synthetic distributions.
//! * [`infometrics`] computes Shannon and Renyi entropies and the
//!   non-uniformity factor `beta`.
//! * [`strategies`] describes the scanning algorithms and draws concrete
//!   scan targets.
//! * [`rates`] holds the closed-form infection rates and defense analyses.
//! * [`epidemic`] runs the Monte Carlo early-stage estimator and the
//!   discrete-time propagation model.
//!
//! With the default `parallel` feature the Monte Carlo engine and the
//! per-subnet propagation update run on rayon; without it every engine runs
//! sequentially. Results never depend on which path was taken.

pub mod addrspace;
pub mod epidemic;
mod error;
pub mod exec;
pub mod formats;
pub mod infometrics;
pub mod rates;
pub mod strategies;
mod sum;

pub use addrspace::{Address, GroupDistribution, HostSet, PrefixLevel};
pub use error::{Error, Result};
pub use strategies::ScanStrategy;
