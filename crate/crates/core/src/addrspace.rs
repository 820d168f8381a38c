//! IPv4 address space, `/l` prefix aggregation, host-list ingestion and
//! synthetic vulnerable-host distributions.
//!
//! Groups are indexed from 0: group `i` at level `l` covers the addresses
//! `[i * 2^(32-l), (i + 1) * 2^(32-l))`.

use std::fmt;
use std::io::BufRead;
use std::net::Ipv4Addr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

/// Levels at or below this are stored densely.
pub const DENSE_MAX_LEVEL: u8 = 16;

/// Synthetic generators that enumerate every group refuse levels above this.
pub const SYNTH_MAX_LEVEL: u8 = 24;

/// An IPv4 address as a big-endian 32-bit integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[repr(transparent)]
pub struct Address(pub u32);

impl Address {
    /// Index of the `/l` group containing this address.
    #[inline]
    pub fn group(self, level: PrefixLevel) -> u32 {
        level.group_of(self.0)
    }
}

impl From<Ipv4Addr> for Address {
    fn from(ip: Ipv4Addr) -> Self {
        Address(u32::from(ip))
    }
}

impl From<Address> for Ipv4Addr {
    fn from(a: Address) -> Self {
        Ipv4Addr::from(a.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Ipv4Addr::from(self.0).fmt(f)
    }
}

/// A prefix length `l` in `0..=32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PrefixLevel(u8);

impl PrefixLevel {
    pub const MAX: PrefixLevel = PrefixLevel(32);

    pub fn new(l: u8) -> Result<Self> {
        if l > 32 {
            return Err(Error::param(format!("prefix level {l} exceeds 32")));
        }
        Ok(PrefixLevel(l))
    }

    /// Const constructor for known-good literals; panics on `l > 32`.
    pub const fn of(l: u8) -> Self {
        assert!(l <= 32, "prefix level exceeds 32");
        PrefixLevel(l)
    }

    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }

    /// `2^l` as a float, exact for every level.
    #[inline]
    pub fn group_count_f64(self) -> f64 {
        (self.0 as f64).exp2()
    }

    /// `2^l` groups.
    #[inline]
    pub fn group_count(self) -> u64 {
        1u64 << self.0
    }

    /// `2^(32-l)` addresses per group.
    #[inline]
    pub fn block_size(self) -> u64 {
        1u64 << (32 - self.0)
    }

    #[inline]
    pub fn group_of(self, addr: u32) -> u32 {
        if self.0 == 0 {
            0
        } else {
            addr >> (32 - self.0)
        }
    }

    /// First address of group `group`.
    #[inline]
    pub fn base_of(self, group: u32) -> u32 {
        if self.0 == 0 {
            0
        } else {
            group << (32 - self.0)
        }
    }

    /// Mask selecting the host bits below the prefix.
    #[inline]
    pub fn offset_mask(self) -> u32 {
        if self.0 == 0 {
            u32::MAX
        } else {
            (1u32 << (32 - self.0)).wrapping_sub(1)
        }
    }
}

impl fmt::Display for PrefixLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", self.0)
    }
}

/// A deduplicated, ascending set of host addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostSet {
    addresses: Vec<Address>,
}

impl HostSet {
    pub fn new(mut addresses: Vec<Address>) -> Self {
        addresses.sort_unstable();
        addresses.dedup();
        HostSet { addresses }
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn addresses(&self) -> &[Address] {
        &self.addresses
    }

    pub fn contains(&self, addr: Address) -> bool {
        self.addresses.binary_search(&addr).is_ok()
    }

    /// Group counts at level `level`, ascending by group, zero groups omitted.
    fn group_runs(&self, level: PrefixLevel) -> Vec<(u32, u64)> {
        let mut runs: Vec<(u32, u64)> = Vec::new();
        for a in &self.addresses {
            let g = level.group_of(a.0);
            match runs.last_mut() {
                Some((last, c)) if *last == g => *c += 1,
                _ => runs.push((g, 1)),
            }
        }
        runs
    }
}

impl FromIterator<Address> for HostSet {
    fn from_iter<I: IntoIterator<Item = Address>>(iter: I) -> Self {
        HostSet::new(iter.into_iter().collect())
    }
}

/// Result of [`parse_host_list`].
#[derive(Debug, Clone)]
pub struct ParsedHosts {
    pub hosts: HostSet,
    pub duplicates_dropped: usize,
    /// Blank and `#` comment lines.
    pub ignored_lines: usize,
}

/// Reads one dotted-quad IPv4 address per line. Blank lines and lines whose
/// first non-blank character is `#` are skipped; repeated addresses are
/// dropped and counted.
pub fn parse_host_list<R: BufRead>(reader: R) -> Result<ParsedHosts> {
    let mut addresses = Vec::new();
    let mut ignored_lines = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            ignored_lines += 1;
            continue;
        }
        let ip: Ipv4Addr = trimmed.parse().map_err(|_| Error::Parse {
            line: i + 1,
            text: trimmed.to_string(),
            message: "not a dotted-quad IPv4 address".into(),
        })?;
        addresses.push(Address::from(ip));
    }
    let raw = addresses.len();
    let hosts = HostSet::new(addresses);
    Ok(ParsedHosts {
        duplicates_dropped: raw - hosts.len(),
        hosts,
        ignored_lines,
    })
}

/// Convenience wrapper over [`parse_host_list`] for in-memory text.
pub fn parse_host_str(text: &str) -> Result<ParsedHosts> {
    parse_host_list(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Counts {
    Dense(Vec<u64>),
    /// Ascending by group, no zero entries.
    Sparse(Vec<(u32, u64)>),
}

/// Vulnerable-host counts per `/l` subnet.
#[derive(Debug, Clone)]
pub struct GroupDistribution {
    level: PrefixLevel,
    counts: Counts,
    total: u64,
}

impl PartialEq for GroupDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.total == other.total && self.nonzero().eq(other.nonzero())
    }
}

impl Eq for GroupDistribution {}

impl GroupDistribution {
    /// Builds a distribution from `(group, count)` pairs in any order.
    /// Repeated groups are summed and zero counts dropped.
    pub fn from_pairs<I>(level: PrefixLevel, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u64)>,
    {
        let mut v: Vec<(u32, u64)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        let groups = level.group_count();
        if let Some(&(g, _)) = v.iter().find(|&&(g, _)| g as u64 >= groups) {
            return Err(Error::param(format!(
                "group index {g} out of range for {level} ({groups} groups)"
            )));
        }
        v.sort_unstable_by_key(|&(g, _)| g);
        let mut merged: Vec<(u32, u64)> = Vec::with_capacity(v.len());
        for (g, c) in v {
            match merged.last_mut() {
                Some((last, acc)) if *last == g => *acc += c,
                _ => merged.push((g, c)),
            }
        }
        Ok(Self::from_sorted_runs(level, merged))
    }

    /// Dense constructor; `counts.len()` must equal `2^l`.
    pub fn from_dense(level: PrefixLevel, counts: Vec<u64>) -> Result<Self> {
        if counts.len() as u64 != level.group_count() {
            return Err(Error::param(format!(
                "{} counts supplied for {} groups at {level}",
                counts.len(),
                level.group_count()
            )));
        }
        Self::from_pairs(
            level,
            counts.into_iter().enumerate().map(|(g, c)| (g as u32, c)),
        )
    }

    fn from_sorted_runs(level: PrefixLevel, runs: Vec<(u32, u64)>) -> Self {
        let total = runs.iter().map(|&(_, c)| c).sum();
        let counts = if level.get() <= DENSE_MAX_LEVEL {
            let mut dense = vec![0u64; level.group_count() as usize];
            for (g, c) in runs {
                dense[g as usize] = c;
            }
            Counts::Dense(dense)
        } else {
            Counts::Sparse(runs)
        };
        GroupDistribution {
            level,
            counts,
            total,
        }
    }

    pub fn level(&self) -> PrefixLevel {
        self.level
    }

    /// Total host count `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, group: u32) -> u64 {
        match &self.counts {
            Counts::Dense(d) => d.get(group as usize).copied().unwrap_or(0),
            Counts::Sparse(s) => s
                .binary_search_by_key(&group, |&(g, _)| g)
                .map(|i| s[i].1)
                .unwrap_or(0),
        }
    }

    /// `p_g(i) = N_i / N`; zero on an empty distribution.
    pub fn probability(&self, group: u32) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(group) as f64 / self.total as f64
        }
    }

    /// Occupied groups in ascending order.
    pub fn nonzero(&self) -> Box<dyn Iterator<Item = (u32, u64)> + '_> {
        match &self.counts {
            Counts::Dense(d) => Box::new(
                d.iter()
                    .enumerate()
                    .filter(|&(_, &c)| c > 0)
                    .map(|(g, &c)| (g as u32, c)),
            ),
            Counts::Sparse(s) => Box::new(s.iter().copied()),
        }
    }

    /// Number of occupied groups.
    pub fn support_size(&self) -> u64 {
        match &self.counts {
            Counts::Dense(d) => d.iter().filter(|&&c| c > 0).count() as u64,
            Counts::Sparse(s) => s.len() as u64,
        }
    }

    /// Exact `sum_i N_i^2`.
    pub fn sum_of_squares(&self) -> u128 {
        self.nonzero().map(|(_, c)| (c as u128) * (c as u128)).sum()
    }

    /// The most populated group; ties go to the lowest index.
    pub fn densest_group(&self) -> Option<(u32, u64)> {
        self.nonzero()
            .fold(None, |best: Option<(u32, u64)>, (g, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((g, c)),
            })
    }

    /// Dense probability vector of length `2^l`. Only for `l <= 24`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if self.level.get() > SYNTH_MAX_LEVEL {
            return Err(Error::param(format!(
                "dense probability vector requested at {}",
                self.level
            )));
        }
        let mut p = vec![0.0; self.level.group_count() as usize];
        if self.total > 0 {
            let n = self.total as f64;
            for (g, c) in self.nonzero() {
                p[g as usize] = c as f64 / n;
            }
        }
        Ok(p)
    }

    /// Merges groups to a coarser level `target <= l`.
    pub fn coarsen(&self, target: PrefixLevel) -> Result<Self> {
        if target > self.level {
            return Err(Error::param(format!(
                "cannot refine a {} distribution to {target} without host data",
                self.level
            )));
        }
        let shift = self.level.get() - target.get();
        let mut runs: Vec<(u32, u64)> = Vec::new();
        for (g, c) in self.nonzero() {
            let parent = if shift == 32 { 0 } else { g >> shift };
            match runs.last_mut() {
                Some((last, acc)) if *last == parent => *acc += c,
                _ => runs.push((parent, c)),
            }
        }
        Ok(Self::from_sorted_runs(target, runs))
    }
}

/// Counts hosts per `/l` subnet.
pub fn aggregate(hosts: &HostSet, level: PrefixLevel) -> GroupDistribution {
    GroupDistribution::from_sorted_runs(level, hosts.group_runs(level))
}

/// Aggregates `hosts` at `level` and checks that the result refines
/// `coarse` (the level `l-1` aggregate of the same hosts): every coarse
/// group must split exactly into its two children.
pub fn refine(
    coarse: &GroupDistribution,
    hosts: &HostSet,
    level: PrefixLevel,
) -> Result<GroupDistribution> {
    if level.get() == 0 || coarse.level().get() + 1 != level.get() {
        return Err(Error::param(format!(
            "refine needs a {} distribution and level {}, got {level}",
            coarse.level(),
            coarse.level().get() + 1
        )));
    }
    if coarse.total() != hosts.len() as u64 {
        return Err(Error::param(
            "host set does not match the coarse distribution's total",
        ));
    }
    let fine = aggregate(hosts, level);
    // Children of group i are 2i and 2i+1 with 0-based indices.
    let mut merged: Vec<(u32, u64)> = Vec::new();
    for (g, c) in fine.nonzero() {
        match merged.last_mut() {
            Some((last, acc)) if *last == g >> 1 => *acc += c,
            _ => merged.push((g >> 1, c)),
        }
    }
    if !merged.iter().copied().eq(coarse.nonzero()) {
        return Err(Error::Internal(format!(
            "refinement identity violated between {} and {level}",
            coarse.level()
        )));
    }
    Ok(fine)
}

/// The first `n_occupied` groups hold `hosts_per_group` hosts each.
pub fn synth_uniform(
    n_occupied: u64,
    level: PrefixLevel,
    hosts_per_group: u64,
) -> Result<GroupDistribution> {
    if n_occupied == 0 || n_occupied > level.group_count() {
        return Err(Error::param(format!(
            "n_occupied = {n_occupied} outside 1..={} for {level}",
            level.group_count()
        )));
    }
    if hosts_per_group == 0 {
        return Err(Error::param("hosts_per_group must be at least 1"));
    }
    Ok(GroupDistribution::from_sorted_runs(
        level,
        (0..n_occupied)
            .map(|g| (g as u32, hosts_per_group))
            .collect(),
    ))
}

/// Splits `total` into integer parts proportional to `weights` using
/// largest-remainder rounding. Ties on the remainder favour lower indices.
pub(crate) fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let w_sum: f64 = weights.iter().sum();
    let mut parts = Vec::with_capacity(weights.len());
    let mut rema = Vec::with_capacity(weights.len());
    let mut assigned = 0u64;
    for (i, &w) in weights.iter().enumerate() {
        let share = total as f64 * w / w_sum;
        let floor = share.floor();
        parts.push(floor as u64);
        assigned += floor as u64;
        rema.push((share - floor, i));
    }
    // Float rounding can push the floors past `total` by a hair.
    while assigned > total {
        let i = parts.iter().rposition(|&p| p > 0).expect("positive part");
        parts[i] -= 1;
        assigned -= 1;
    }
    let mut leftover = total - assigned;
    if leftover > 0 {
        rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut k = 0;
        while leftover > 0 {
            parts[rema[k % rema.len()].1] += 1;
            leftover -= 1;
            k += 1;
        }
    }
    parts
}

fn check_synth_level(level: PrefixLevel) -> Result<()> {
    if level.get() > SYNTH_MAX_LEVEL {
        return Err(Error::param(format!(
            "synthetic generators enumerate every group; {level} exceeds /{SYNTH_MAX_LEVEL}"
        )));
    }
    Ok(())
}

/// Power-law distribution: after a seeded shuffle of group indices, the
/// group of rank `r` (1-based) gets a share proportional to `r^-exponent`.
/// Counts sum to exactly `n`.
pub fn synth_zipf(
    level: PrefixLevel,
    exponent: f64,
    n: u64,
    seed: u64,
) -> Result<GroupDistribution> {
    check_synth_level(level)?;
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::param("zipf exponent must be positive and finite"));
    }
    if n == 0 {
        return Err(Error::param("zipf host count must be at least 1"));
    }
    let groups = level.group_count() as usize;
    let weights: Vec<f64> = (1..=groups).map(|r| (r as f64).powf(-exponent)).collect();
    let parts = largest_remainder(&weights, n);
    let mut perm: Vec<u32> = (0..groups as u32).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    GroupDistribution::from_pairs(level, perm.into_iter().zip(parts))
}

/// Parameters for [`synth_clustered`].
#[derive(Debug, Clone, Copy)]
pub struct ClusterSpec {
    /// Occupied `/8` blocks.
    pub blocks: u32,
    /// Occupied `/16` subnets inside each occupied `/8`.
    pub subnets_per_block: u32,
    /// Zipf exponent over the occupied subnets; `0` spreads hosts evenly.
    pub exponent: f64,
    pub hosts: u64,
    pub seed: u64,
}

/// Two-level clustered `/16` distribution: hosts live in `blocks` random
/// `/8`s, each with `subnets_per_block` random occupied `/16`s. With
/// `exponent = 0` this gives `beta(8) = 256 / blocks` and
/// `beta(16) = 65536 / (blocks * subnets_per_block)` up to integer rounding.
pub fn synth_clustered(spec: ClusterSpec) -> Result<GroupDistribution> {
    if spec.blocks == 0 || spec.blocks > 256 {
        return Err(Error::param("blocks must be in 1..=256"));
    }
    if spec.subnets_per_block == 0 || spec.subnets_per_block > 256 {
        return Err(Error::param("subnets_per_block must be in 1..=256"));
    }
    if !(spec.exponent >= 0.0 && spec.exponent.is_finite()) {
        return Err(Error::param("cluster exponent must be non-negative"));
    }
    if spec.hosts == 0 {
        return Err(Error::param("cluster host count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blocks = index::sample(&mut rng, 256, spec.blocks as usize);
    let mut groups = Vec::with_capacity((spec.blocks * spec.subnets_per_block) as usize);
    for b in blocks.iter() {
        for s in index::sample(&mut rng, 256, spec.subnets_per_block as usize).iter() {
            groups.push(((b as u32) << 8) | s as u32);
        }
    }
    groups.shuffle(&mut rng);
    let weights: Vec<f64> = (1..=groups.len())
        .map(|r| (r as f64).powf(-spec.exponent))
        .collect();
    let parts = largest_remainder(&weights, spec.hosts);
    GroupDistribution::from_pairs(PrefixLevel::of(16), groups.into_iter().zip(parts))
}

/// Places each group's hosts at distinct, uniformly random addresses inside
/// the group's block.
pub fn materialize_hosts(dist: &GroupDistribution, seed: u64) -> Result<HostSet> {
    let level = dist.level();
    let capacity = level.block_size();
    if let Some((g, c)) = dist.nonzero().find(|&(_, c)| c > capacity) {
        return Err(Error::Capacity {
            group: g,
            count: c,
            capacity,
            level: level.get(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut addresses = Vec::with_capacity(dist.total() as usize);
    for (g, c) in dist.nonzero() {
        let base = level.base_of(g);
        for off in index::sample(&mut rng, capacity as usize, c as usize).iter() {
            addresses.push(Address(base + off as u32));
        }
    }
    Ok(HostSet::new(addresses))
}

/// One point of a complementary cumulative distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcdfPoint {
    pub threshold: u64,
    /// Fraction of all `2^l` subnets holding strictly more than `threshold`.
    pub fraction: f64,
}

/// CCDF of per-subnet host counts, evaluated at 0 and at every distinct
/// occupied count, ascending.
pub fn ccdf(dist: &GroupDistribution) -> Vec<CcdfPoint> {
    let mut counts: Vec<u64> = dist.nonzero().map(|(_, c)| c).collect();
    counts.sort_unstable();
    let groups = dist.level().group_count_f64();
    let mut points = vec![CcdfPoint {
        threshold: 0,
        fraction: counts.len() as f64 / groups,
    }];
    let mut i = 0;
    while i < counts.len() {
        let x = counts[i];
        let mut j = i;
        while j < counts.len() && counts[j] == x {
            j += 1;
        }
        points.push(CcdfPoint {
            threshold: x,
            fraction: (counts.len() - j) as f64 / groups,
        });
        i = j;
    }
    points
}
