//! Closed-form early-stage infection rates.
//!
//! Every strategy with a fixed group law reduces to one collision
//! probability `p_h = sum_i p_g(i) q_g(i)` at its level `l`, from which
//!
//! * uncertainty = `-log2 p_h`,
//! * information bits = `l + log2 p_h`,
//! * `alpha = alpha_RS * 2^l * p_h = alpha_RS * 2^(information bits)`.
//!
//! The time unit of `s` carries through unchanged.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::addrspace::{aggregate, GroupDistribution, HostSet, PrefixLevel};
use crate::infometrics::{collision_mass, NonUniformity};
use crate::strategies::{at_level, ImportanceWeights, ScanStrategy};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Size of the IPv4 scanning space.
pub const IPV4_SPACE: f64 = 4_294_967_296.0;

/// Size of an IPv6 `/64` subnet.
pub const IPV6_SUBNET_SPACE: f64 = 18_446_744_073_709_551_616.0;

/// Code Red v2 vulnerable population.
pub const CODE_RED_POPULATION: u64 = 360_000;

/// Code Red v2 scans per minute.
pub const CODE_RED_SCANS_PER_MINUTE: f64 = 358.0;

/// `beta` values and densest-subnet shares given directly, without host
/// data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InjectedProfile {
    betas: BTreeMap<u8, f64>,
    max_shares: BTreeMap<u8, f64>,
}

impl InjectedProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_beta(mut self, l: PrefixLevel, beta: f64) -> Result<Self> {
        if !(beta >= 1.0 && beta <= l.group_count_f64()) {
            return Err(Error::param(format!("beta{l} = {beta} outside [1, 2^l]")));
        }
        self.betas.insert(l.get(), beta);
        Ok(self)
    }

    pub fn with_max_share(mut self, l: PrefixLevel, max_p: f64) -> Result<Self> {
        if !(max_p > 0.0 && max_p <= 1.0) {
            return Err(Error::param(format!("max share {max_p} outside (0, 1]")));
        }
        self.max_shares.insert(l.get(), max_p);
        Ok(self)
    }
}

/// Where the distribution-dependent quantities come from.
#[derive(Debug, Clone, Copy)]
pub enum Profile<'a> {
    Hosts(&'a HostSet),
    Distribution(&'a GroupDistribution),
    Injected(&'a InjectedProfile),
}

impl Profile<'_> {
    /// The group distribution at level `l`, when it can be derived.
    pub fn distribution(&self, l: PrefixLevel) -> Result<Option<GroupDistribution>> {
        match self {
            Profile::Hosts(h) => Ok(Some(aggregate(h, l))),
            Profile::Distribution(d) => {
                if l > d.level() {
                    Err(Error::param(format!(
                        "a {} distribution cannot supply {l} quantities; provide host data",
                        d.level()
                    )))
                } else {
                    at_level(d, l).map(Some)
                }
            }
            Profile::Injected(_) => Ok(None),
        }
    }

    /// `sum_i p_g(i)^2` at level `l`.
    pub fn collision_mass(&self, l: PrefixLevel) -> Result<f64> {
        match self {
            Profile::Injected(inj) => inj
                .betas
                .get(&l.get())
                .map(|b| b / l.group_count_f64())
                .ok_or_else(|| Error::param(format!("no beta injected for {l}"))),
            _ => collision_mass(&self.distribution(l)?.expect("derived")),
        }
    }

    pub fn beta(&self, l: PrefixLevel) -> Result<NonUniformity> {
        Ok(NonUniformity {
            l,
            beta: self.collision_mass(l)? * l.group_count_f64(),
        })
    }

    /// `max_i p_g(i)` at level `l`.
    pub fn max_share(&self, l: PrefixLevel) -> Result<f64> {
        match self {
            Profile::Injected(inj) => inj
                .max_shares
                .get(&l.get())
                .copied()
                .ok_or_else(|| Error::param(format!("no max share injected for {l}"))),
            _ => {
                let d = self.distribution(l)?.expect("derived");
                let (_, c) = d
                    .densest_group()
                    .ok_or_else(|| Error::param("empty distribution"))?;
                Ok(c as f64 / d.total() as f64)
            }
        }
    }
}

/// Scan rate, population, scanning space and distribution source.
#[derive(Debug, Clone, Copy)]
pub struct ScanContext<'a> {
    pub s: f64,
    pub n: u64,
    pub omega: f64,
    pub profile: Profile<'a>,
}

impl<'a> ScanContext<'a> {
    /// IPv4 context (`omega = 2^32`).
    pub fn new(s: f64, n: u64, profile: Profile<'a>) -> Result<Self> {
        Self::with_space(s, n, IPV4_SPACE, profile)
    }

    pub fn with_space(s: f64, n: u64, omega: f64, profile: Profile<'a>) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::param(format!("scan rate {s} must be positive")));
        }
        if n == 0 {
            return Err(Error::param("vulnerable population must be at least 1"));
        }
        if omega.is_nan() || omega < n as f64 {
            return Err(Error::param("scanning space smaller than the population"));
        }
        Ok(ScanContext {
            s,
            n,
            omega,
            profile,
        })
    }

    /// Context whose population is the host count of `dist`.
    pub fn for_distribution(s: f64, dist: &'a GroupDistribution) -> Result<Self> {
        Self::new(s, dist.total(), Profile::Distribution(dist))
    }

    pub fn for_hosts(s: f64, hosts: &'a HostSet) -> Result<Self> {
        Self::new(s, hosts.len() as u64, Profile::Hosts(hosts))
    }
}

/// `alpha_RS = s N / omega`.
pub fn alpha_rs(ctx: &ScanContext) -> f64 {
    ctx.s * ctx.n as f64 / ctx.omega
}

/// `sum_i p_g(i) q(i)` for a scanning distribution `q` over the groups of
/// `dist`.
pub fn collision_probability(dist: &GroupDistribution, q: &[f64]) -> Result<f64> {
    if q.len() as u64 != dist.level().group_count() {
        return Err(Error::param(format!(
            "scan vector has {} entries, distribution has {} groups",
            q.len(),
            dist.level().group_count()
        )));
    }
    if dist.is_empty() {
        return Err(Error::param(
            "collision probability of an empty distribution",
        ));
    }
    let n = dist.total() as f64;
    let acc: CompensatedSum = dist
        .nonzero()
        .map(|(g, c)| c as f64 / n * q[g as usize])
        .collect();
    Ok(acc.value())
}

/// Both stage rates of modified sequential scanning. No blend is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MssStages {
    /// Random-scanning stage, `alpha_RS`.
    pub mss_1: f64,
    /// Sequential stage, `alpha_RS * beta(l)`.
    pub mss_2: f64,
}

/// Analytical uncertainty, information bits and infection rate of one
/// strategy. For MSS the headline numbers describe the sequential stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub strategy: String,
    pub label: String,
    pub l: u8,
    pub collision_probability: f64,
    pub uncertainty: f64,
    pub info_bits: f64,
    pub alpha: f64,
    pub mss: Option<MssStages>,
}

fn report(strategy: &ScanStrategy, ctx: &ScanContext, p_h: f64) -> RateReport {
    let l = strategy.level();
    let alpha = alpha_rs(ctx) * l.group_count_f64() * p_h;
    RateReport {
        strategy: strategy.to_string(),
        label: strategy.label(),
        l: l.get(),
        collision_probability: p_h,
        uncertainty: -p_h.log2(),
        info_bits: l.get() as f64 + p_h.log2(),
        alpha,
        mss: None,
    }
}

/// Collision probability of `strategy` averaged over a scanner placed at a
/// random vulnerable host.
pub fn strategy_collision_probability(strategy: &ScanStrategy, ctx: &ScanContext) -> Result<f64> {
    strategy.validate()?;
    let l = strategy.level();
    let uniform = 1.0 / l.group_count_f64();
    let p_h = match strategy {
        ScanStrategy::Random { .. } => uniform,
        ScanStrategy::Importance { weights, .. } => match weights {
            ImportanceWeights::HostDensity => ctx.profile.collision_mass(l)?,
            ImportanceWeights::Explicit(q) => {
                let d = ctx.profile.distribution(l)?.ok_or_else(|| {
                    Error::param("importance scanning with explicit weights needs host data")
                })?;
                collision_probability(&d, q)?
            }
        },
        ScanStrategy::OptimalImportance { .. } => ctx.profile.max_share(l)?,
        ScanStrategy::Localized { p_a, .. } => {
            p_a * ctx.profile.collision_mass(l)? + (1.0 - p_a) * uniform
        }
        ScanStrategy::TwoLevelLocalized { p_b, p_c } => {
            let mass8 = ctx.profile.collision_mass(PrefixLevel::of(8))?;
            let mass16 = ctx.profile.collision_mass(PrefixLevel::of(16))?;
            (1.0 - p_b - p_c) * uniform + p_c * mass16 + p_b * mass8 / 256.0
        }
        ScanStrategy::ModifiedSequential { .. } => ctx.profile.collision_mass(l)?,
    };
    Ok(p_h)
}

/// Analytical rate report for one strategy.
pub fn alpha_for(strategy: &ScanStrategy, ctx: &ScanContext) -> Result<RateReport> {
    let p_h = strategy_collision_probability(strategy, ctx)?;
    let mut r = report(strategy, ctx, p_h);
    if let ScanStrategy::ModifiedSequential { .. } = strategy {
        r.mss = Some(MssStages {
            mss_1: alpha_rs(ctx),
            mss_2: r.alpha,
        });
    }
    Ok(r)
}

pub fn rate_table(strategies: &[ScanStrategy], ctx: &ScanContext) -> Result<Vec<RateReport>> {
    strategies.iter().map(|s| alpha_for(s, ctx)).collect()
}

fn check_deployment(d: f64, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::param(format!("deployment ratio {d} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!(
            "protection probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Host-density `/l` IS rate when a fraction `d` of hosts is hardened so one
/// exploit attempt succeeds with probability `p`:
/// `alpha_RS * beta(l) * (1 - d + d p)`.
///
/// With `p` read as the throttled-to-unthrottled scan-rate ratio the same
/// expression covers virus throttling.
pub fn pp_modified_alpha(
    strategy: &ScanStrategy,
    ctx: &ScanContext,
    d: f64,
    p: f64,
) -> Result<f64> {
    check_deployment(d, p)?;
    match strategy {
        ScanStrategy::Importance {
            l,
            weights: ImportanceWeights::HostDensity,
        } => Ok(alpha_rs(ctx) * ctx.profile.beta(*l)?.beta * (1.0 - d + d * p)),
        other => Err(Error::Unsupported {
            strategy: other.to_string(),
            reason: "protection analysis covers host-density importance scanning".into(),
        }),
    }
}

/// Largest protection probability that slows host-density IS down to random
/// scanning: `(1 - (1 - d) beta) / (d beta)`. Negative means no `p` works at
/// this deployment.
pub fn pp_requirement(beta: f64, d: f64) -> Result<f64> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::param(format!("beta = {beta} must be at least 1")));
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::param(format!("deployment ratio {d} outside (0, 1]")));
    }
    Ok((1.0 - (1.0 - d) * beta) / (d * beta))
}

/// Smallest deployment ratio that works with perfect protection (`p = 0`):
/// `1 - 1/beta`.
pub fn pp_min_deployment(beta: f64) -> Result<f64> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::param(format!("beta = {beta} must be at least 1")));
    }
    Ok(1.0 - 1.0 / beta)
}

/// Importance-scanning rate inside one IPv6 `/64`: `s N / 2^64 * beta(32)`.
pub fn ipv6_alpha(s: f64, n: f64, beta32: f64) -> Result<f64> {
    if !(s > 0.0 && n > 0.0 && beta32 > 0.0) {
        return Err(Error::param("IPv6 rate inputs must be positive"));
    }
    Ok(s * n / IPV6_SUBNET_SPACE * beta32)
}

/// Code Red v2 random-scanning rate per second.
pub fn code_red_alpha_per_second() -> f64 {
    CODE_RED_POPULATION as f64 * (CODE_RED_SCANS_PER_MINUTE / 60.0) / IPV4_SPACE
}
