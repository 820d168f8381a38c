//! Shannon and Renyi entropies of group distributions and the
//! non-uniformity factor `beta(l) = 2^l * sum_i p_i^2`.
//!
//! All logarithms are base 2. Empty groups contribute nothing to any sum.

use serde::Serialize;

use crate::addrspace::{aggregate, GroupDistribution, HostSet, PrefixLevel};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Orders closer than this to 1 are rejected by [`renyi_entropy`].
pub const SHANNON_ORDER_GUARD: f64 = 1e-6;

/// Entropy summary of one distribution. `h0_support` is `log2` of the number
/// of occupied groups; rate formulas use the full-space value `l` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    pub l: u8,
    pub h0_support: f64,
    pub shannon: f64,
    pub h2: f64,
    pub h_inf: f64,
    pub beta: f64,
}

/// The non-uniformity factor at one prefix level; `1 <= beta <= 2^l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonUniformity {
    pub l: PrefixLevel,
    pub beta: f64,
}

impl NonUniformity {
    /// Information bits a host-density importance scanner extracts.
    pub fn bits(&self) -> f64 {
        self.beta.log2()
    }
}

fn require_hosts(dist: &GroupDistribution) -> Result<()> {
    if dist.is_empty() {
        Err(Error::param(
            "entropy of an empty distribution is undefined",
        ))
    } else {
        Ok(())
    }
}

/// Exact `sum_i p_i^2`, rounded once.
pub fn collision_mass(dist: &GroupDistribution) -> Result<f64> {
    require_hosts(dist)?;
    let n = dist.total() as u128;
    Ok(dist.sum_of_squares() as f64 / (n * n) as f64)
}

/// Renyi entropy of order `q`: `log2(sum p_i^q) / (1 - q)`.
///
/// `q = 0` is `log2` of the support size and `q = +inf` is the min-entropy.
/// Orders within [`SHANNON_ORDER_GUARD`] of 1 are rejected; use
/// [`shannon_entropy`].
pub fn renyi_entropy(dist: &GroupDistribution, q: f64) -> Result<f64> {
    require_hosts(dist)?;
    if q.is_nan() || q < 0.0 {
        return Err(Error::param(format!(
            "Renyi order {q} must be non-negative"
        )));
    }
    if (q - 1.0).abs() < SHANNON_ORDER_GUARD {
        return Err(Error::param(
            "Renyi order 1 is the Shannon entropy; call shannon_entropy",
        ));
    }
    if q == 0.0 {
        return Ok((dist.support_size() as f64).log2());
    }
    if q == 2.0 {
        return Ok(-collision_mass(dist)?.log2());
    }
    if q.is_infinite() {
        return min_entropy(dist);
    }
    let n = dist.total() as f64;
    let s: CompensatedSum = dist
        .nonzero()
        .map(|(_, c)| (c as f64 / n).powf(q))
        .collect();
    Ok(s.value().log2() / (1.0 - q))
}

/// `-sum p_i log2 p_i`, computed as `log2 N - sum N_i log2 N_i / N`.
pub fn shannon_entropy(dist: &GroupDistribution) -> Result<f64> {
    require_hosts(dist)?;
    let n = dist.total() as f64;
    let s: CompensatedSum = dist
        .nonzero()
        .map(|(_, c)| {
            let c = c as f64;
            c * c.log2()
        })
        .collect();
    // Clamp tiny negative rounding on single-group inputs.
    Ok((n.log2() - s.value() / n).max(0.0))
}

/// `-log2 max_i p_i`.
pub fn min_entropy(dist: &GroupDistribution) -> Result<f64> {
    require_hosts(dist)?;
    let (_, max) = dist.densest_group().expect("non-empty");
    Ok((dist.total() as f64).log2() - (max as f64).log2())
}

/// `beta(l) = 2^l * sum_i p_i^2`.
pub fn non_uniformity_factor(dist: &GroupDistribution) -> Result<NonUniformity> {
    let mass = collision_mass(dist)?;
    Ok(NonUniformity {
        l: dist.level(),
        beta: dist.level().group_count_f64() * mass,
    })
}

/// Squared L2 distance `sum_i (p_i - 2^-l)^2` over all `2^l` groups,
/// empty ones included.
pub fn l2_distance_to_uniform(dist: &GroupDistribution) -> Result<f64> {
    require_hosts(dist)?;
    let level = dist.level();
    let u = (-(level.get() as f64)).exp2();
    let n = dist.total() as f64;
    let mut acc = CompensatedSum::default();
    let mut occupied = 0u64;
    for (_, c) in dist.nonzero() {
        let d = c as f64 / n - u;
        acc.add(d * d);
        occupied += 1;
    }
    acc.add((level.group_count() - occupied) as f64 * u * u);
    Ok(acc.value())
}

pub fn entropy_report(dist: &GroupDistribution) -> Result<EntropyReport> {
    Ok(EntropyReport {
        l: dist.level().get(),
        h0_support: renyi_entropy(dist, 0.0)?,
        shannon: shannon_entropy(dist)?,
        h2: renyi_entropy(dist, 2.0)?,
        h_inf: min_entropy(dist)?,
        beta: non_uniformity_factor(dist)?.beta,
    })
}

fn profile<F>(hosts: &HostSet, l_max: PrefixLevel, metric: F) -> Result<Vec<(u8, f64)>>
where
    F: Fn(&GroupDistribution) -> Result<f64>,
{
    if hosts.is_empty() {
        return Err(Error::param("profile of an empty host set"));
    }
    (0..=l_max.get())
        .map(|l| Ok((l, metric(&aggregate(hosts, PrefixLevel::of(l)))?)))
        .collect()
}

/// `beta(l)` for `l = 0..=l_max`.
pub fn beta_profile(hosts: &HostSet, l_max: PrefixLevel) -> Result<Vec<(u8, f64)>> {
    profile(hosts, l_max, |d| Ok(non_uniformity_factor(d)?.beta))
}

/// Shannon entropy of `P(l)` for `l = 0..=l_max`.
pub fn shannon_profile(hosts: &HostSet, l_max: PrefixLevel) -> Result<Vec<(u8, f64)>> {
    profile(hosts, l_max, shannon_entropy)
}

/// Profile of a group-level input, for levels `0..=dist.level()`.
pub fn distribution_profile<F>(dist: &GroupDistribution, metric: F) -> Result<Vec<(u8, f64)>>
where
    F: Fn(&GroupDistribution) -> Result<f64>,
{
    require_hosts(dist)?;
    (0..=dist.level().get())
        .map(|l| Ok((l, metric(&dist.coarsen(PrefixLevel::of(l))?)?)))
        .collect()
}
