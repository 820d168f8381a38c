//! Randomized scanning algorithms: their group scanning distributions and
//! a seeded sampler of concrete 32-bit targets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::addrspace::{Address, GroupDistribution, PrefixLevel};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Tolerance on `sum q = 1` for explicit scanning distributions.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Level used for reporting RS when none is given.
pub const DEFAULT_LEVEL: PrefixLevel = PrefixLevel::of(16);

/// Group weights of an importance scanner.
#[derive(Debug, Clone, PartialEq)]
pub enum ImportanceWeights {
    /// `q = p_g`: scan each subnet in proportion to its vulnerable hosts.
    HostDensity,
    /// A caller-supplied `q` over all `2^l` groups.
    Explicit(Arc<[f64]>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanStrategy {
    /// Uniform over the whole space. `l` only sets the level used when
    /// reporting uncertainty.
    Random { l: PrefixLevel },
    Importance {
        l: PrefixLevel,
        weights: ImportanceWeights,
    },
    /// All scans go to the densest `/l` subnet.
    OptimalImportance { l: PrefixLevel },
    /// With probability `p_a` the target shares the scanner's first `l` bits.
    Localized { l: PrefixLevel, p_a: f64 },
    /// Same first byte with probability `p_b`, same first two bytes with
    /// probability `p_c`, otherwise uniform.
    TwoLevelLocalized { p_b: f64, p_c: f64 },
    /// Random until the first hit `B`, then `B+1, B+2, ...` cyclically inside
    /// `B`'s `/l` block.
    ModifiedSequential { l: PrefixLevel },
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{name} = {p} is not a probability")))
    }
}

impl ScanStrategy {
    pub fn random() -> Self {
        ScanStrategy::Random { l: DEFAULT_LEVEL }
    }

    /// Host-density importance scanning (`q = p_g`), the "suboptimal" IS.
    pub fn importance(l: PrefixLevel) -> Self {
        ScanStrategy::Importance {
            l,
            weights: ImportanceWeights::HostDensity,
        }
    }

    pub fn importance_with(l: PrefixLevel, q: Vec<f64>) -> Result<Self> {
        let s = ScanStrategy::Importance {
            l,
            weights: ImportanceWeights::Explicit(q.into()),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn optimal_importance(l: PrefixLevel) -> Self {
        ScanStrategy::OptimalImportance { l }
    }

    pub fn localized(l: PrefixLevel, p_a: f64) -> Result<Self> {
        let s = ScanStrategy::Localized { l, p_a };
        s.validate()?;
        Ok(s)
    }

    pub fn two_level(p_b: f64, p_c: f64) -> Result<Self> {
        let s = ScanStrategy::TwoLevelLocalized { p_b, p_c };
        s.validate()?;
        Ok(s)
    }

    pub fn modified_sequential(l: PrefixLevel) -> Self {
        ScanStrategy::ModifiedSequential { l }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScanStrategy::Localized { p_a, .. } => check_probability("p_a", *p_a),
            ScanStrategy::TwoLevelLocalized { p_b, p_c } => {
                check_probability("p_b", *p_b)?;
                check_probability("p_c", *p_c)?;
                if p_b + p_c > 1.0 {
                    return Err(Error::param(format!("p_b + p_c = {} exceeds 1", p_b + p_c)));
                }
                Ok(())
            }
            ScanStrategy::Importance {
                l,
                weights: ImportanceWeights::Explicit(q),
            } => {
                if q.len() as u64 != l.group_count() {
                    return Err(Error::param(format!(
                        "scan distribution has {} entries, {l} needs {}",
                        q.len(),
                        l.group_count()
                    )));
                }
                if q.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(Error::param("scan distribution has a negative entry"));
                }
                let total: CompensatedSum = q.iter().copied().collect();
                if (total.value() - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(Error::param(format!(
                        "scan distribution sums to {}, not 1",
                        total.value()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Prefix level the strategy's group law is defined at.
    pub fn level(&self) -> PrefixLevel {
        match self {
            ScanStrategy::Random { l }
            | ScanStrategy::Importance { l, .. }
            | ScanStrategy::OptimalImportance { l }
            | ScanStrategy::Localized { l, .. }
            | ScanStrategy::ModifiedSequential { l } => *l,
            ScanStrategy::TwoLevelLocalized { .. } => PrefixLevel::of(16),
        }
    }

    /// Whether the scanner needs a home subnet.
    pub fn is_local(&self) -> bool {
        matches!(
            self,
            ScanStrategy::Localized { .. } | ScanStrategy::TwoLevelLocalized { .. }
        )
    }

    /// Short human label in the style `/16 LS`.
    pub fn label(&self) -> String {
        match self {
            ScanStrategy::Random { .. } => "RS".into(),
            ScanStrategy::Importance { l, .. } => format!("{l} IS"),
            ScanStrategy::OptimalImportance { l } => format!("{l} OPT_IS"),
            ScanStrategy::Localized { l, .. } => format!("{l} LS"),
            ScanStrategy::TwoLevelLocalized { .. } => "2LLS".into(),
            ScanStrategy::ModifiedSequential { l } => format!("{l} MSS"),
        }
    }
}

/// Canonical spec string, e.g. `ls:l=16,pa=0.75`.
impl fmt::Display for ScanStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanStrategy::Random { l } if *l == DEFAULT_LEVEL => write!(f, "rs"),
            ScanStrategy::Random { l } => write!(f, "rs:l={}", l.get()),
            ScanStrategy::Importance { l, weights } => match weights {
                ImportanceWeights::HostDensity => write!(f, "is:l={}", l.get()),
                ImportanceWeights::Explicit(_) => write!(f, "is:l={},q=explicit", l.get()),
            },
            ScanStrategy::OptimalImportance { l } => write!(f, "optis:l={}", l.get()),
            ScanStrategy::Localized { l, p_a } => write!(f, "ls:l={},pa={p_a}", l.get()),
            ScanStrategy::TwoLevelLocalized { p_b, p_c } => write!(f, "2lls:pb={p_b},pc={p_c}"),
            ScanStrategy::ModifiedSequential { l } => write!(f, "mss:l={}", l.get()),
        }
    }
}

pub const STRATEGY_TOKENS: &str =
    "rs, is:l=<l>, optis:l=<l>, ls:l=<l>,pa=<p>, 2lls:pb=<p>,pc=<p>, mss:l=<l>";

impl FromStr for ScanStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut l: Option<PrefixLevel> = None;
        let (mut pa, mut pb, mut pc) = (None, None, None);
        for kv in rest.split(',').filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected key=value in `{s}`, got `{kv}`")))?;
            let num = |v: &str| -> Result<f64> {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::param(format!("`{v}` is not a number in `{s}`")))
            };
            match k.trim() {
                "l" => {
                    let v: u8 = v.trim().parse().map_err(|_| {
                        Error::param(format!("`{v}` is not a prefix level in `{s}`"))
                    })?;
                    l = Some(PrefixLevel::new(v)?);
                }
                "pa" => pa = Some(num(v)?),
                "pb" => pb = Some(num(v)?),
                "pc" => pc = Some(num(v)?),
                other => {
                    return Err(Error::param(format!(
                        "unknown parameter `{other}` in `{s}`"
                    )));
                }
            }
        }
        let need_l = || l.ok_or_else(|| Error::param(format!("`{s}` needs l=<prefix>")));
        let strategy = match kind.to_ascii_lowercase().as_str() {
            "rs" => ScanStrategy::Random {
                l: l.unwrap_or(DEFAULT_LEVEL),
            },
            "is" => ScanStrategy::importance(need_l()?),
            "optis" => ScanStrategy::optimal_importance(need_l()?),
            "ls" => ScanStrategy::localized(
                need_l()?,
                pa.ok_or_else(|| Error::param(format!("`{s}` needs pa=<p>")))?,
            )?,
            "2lls" => ScanStrategy::two_level(
                pb.ok_or_else(|| Error::param(format!("`{s}` needs pb=<p>")))?,
                pc.ok_or_else(|| Error::param(format!("`{s}` needs pc=<p>")))?,
            )?,
            "mss" => ScanStrategy::modified_sequential(need_l()?),
            _ => {
                return Err(Error::param(format!(
                    "unknown strategy `{s}`; valid forms: {STRATEGY_TOKENS}"
                )))
            }
        };
        Ok(strategy)
    }
}

/// Brings `dist` to level `l`, coarsening when it is finer.
pub(crate) fn at_level(dist: &GroupDistribution, l: PrefixLevel) -> Result<GroupDistribution> {
    if dist.level() == l {
        Ok(dist.clone())
    } else {
        dist.coarsen(l)
    }
}

fn need_dist<'a>(
    strategy: &ScanStrategy,
    dist: Option<&'a GroupDistribution>,
) -> Result<&'a GroupDistribution> {
    dist.filter(|d| !d.is_empty())
        .ok_or_else(|| Error::param(format!("{strategy} needs the vulnerable-host distribution")))
}

/// Probability that one scan targets each group, as a vector over the
/// `2^l` groups at [`ScanStrategy::level`].
///
/// `home` is the scanner's own group (ignored unless the strategy is
/// local). `dist` is required by host-density and optimal importance
/// scanning.
pub fn group_scan_distribution(
    strategy: &ScanStrategy,
    home: u32,
    dist: Option<&GroupDistribution>,
) -> Result<Vec<f64>> {
    strategy.validate()?;
    let l = strategy.level();
    if l.get() > crate::addrspace::SYNTH_MAX_LEVEL {
        return Err(Error::param(format!(
            "group scan vector at {l} is too large"
        )));
    }
    let groups = l.group_count() as usize;
    if strategy.is_local() && home as usize >= groups {
        return Err(Error::param(format!(
            "home group {home} out of range for {l}"
        )));
    }
    let uniform = 1.0 / groups as f64;
    let q = match strategy {
        ScanStrategy::Random { .. } => vec![uniform; groups],
        ScanStrategy::Importance { weights, .. } => match weights {
            ImportanceWeights::Explicit(q) => q.to_vec(),
            ImportanceWeights::HostDensity => {
                at_level(need_dist(strategy, dist)?, l)?.probabilities()?
            }
        },
        ScanStrategy::OptimalImportance { .. } => {
            let d = at_level(need_dist(strategy, dist)?, l)?;
            let (g, _) = d.densest_group().expect("non-empty");
            let mut q = vec![0.0; groups];
            q[g as usize] = 1.0;
            q
        }
        ScanStrategy::Localized { p_a, .. } => {
            let mut q = vec![(1.0 - p_a) * uniform; groups];
            q[home as usize] += p_a;
            q
        }
        ScanStrategy::TwoLevelLocalized { p_b, p_c } => {
            let mut q = vec![(1.0 - p_b - p_c) * uniform; groups];
            let first = (home >> 8) << 8;
            for g in first..first + 256 {
                q[g as usize] += p_b / 256.0;
            }
            q[home as usize] += p_c;
            q
        }
        ScanStrategy::ModifiedSequential { .. } => {
            return Err(Error::Unsupported {
                strategy: strategy.to_string(),
                reason: "sequential scanning has no fixed group distribution".into(),
            })
        }
    };
    Ok(q)
}

#[derive(Debug, Clone)]
enum Law {
    Uniform,
    Weighted {
        level: PrefixLevel,
        table: Arc<WeightedAliasIndex<f64>>,
    },
    Fixed {
        level: PrefixLevel,
        group: u32,
    },
    Local {
        level: PrefixLevel,
        p_a: f64,
    },
    TwoLevel {
        p_b: f64,
        p_c: f64,
    },
    Sequential {
        level: PrefixLevel,
    },
}

/// Immutable, shareable sampling tables for one strategy over one
/// vulnerable-host distribution.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    strategy: ScanStrategy,
    law: Law,
}

impl ScanPlan {
    /// `dist` must be at the strategy's level or finer.
    pub fn new(strategy: &ScanStrategy, dist: &GroupDistribution) -> Result<Self> {
        strategy.validate()?;
        let law = match strategy {
            ScanStrategy::Random { .. } => Law::Uniform,
            ScanStrategy::Importance { l, weights } => {
                let q = match weights {
                    ImportanceWeights::Explicit(q) => q.to_vec(),
                    ImportanceWeights::HostDensity => {
                        at_level(need_dist(strategy, Some(dist))?, *l)?.probabilities()?
                    }
                };
                let table = WeightedAliasIndex::new(q)
                    .map_err(|e| Error::param(format!("cannot sample {strategy}: {e}")))?;
                Law::Weighted {
                    level: *l,
                    table: Arc::new(table),
                }
            }
            ScanStrategy::OptimalImportance { l } => {
                let d = at_level(need_dist(strategy, Some(dist))?, *l)?;
                let (group, _) = d.densest_group().expect("non-empty");
                Law::Fixed { level: *l, group }
            }
            ScanStrategy::Localized { l, p_a } => Law::Local {
                level: *l,
                p_a: *p_a,
            },
            ScanStrategy::TwoLevelLocalized { p_b, p_c } => Law::TwoLevel {
                p_b: *p_b,
                p_c: *p_c,
            },
            ScanStrategy::ModifiedSequential { l } => Law::Sequential { level: *l },
        };
        Ok(ScanPlan {
            strategy: strategy.clone(),
            law,
        })
    }

    pub fn strategy(&self) -> &ScanStrategy {
        &self.strategy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MssPhase {
    RandomPhase,
    SequentialPhase,
}

/// Single-owner mutable scanner: a plan, the scanner's home subnet, the
/// sequential-scan phase, and its private random stream.
#[derive(Debug, Clone)]
pub struct ScannerState<'p, R> {
    plan: &'p ScanPlan,
    home: u32,
    phase: MssPhase,
    cursor: u32,
    rng: R,
}

impl<'p, R: RngCore> ScannerState<'p, R> {
    /// `home` is the scanner's group at the strategy level (the `/16` for
    /// two-level localized scanning); required for local strategies.
    pub fn new(plan: &'p ScanPlan, home: Option<u32>, rng: R) -> Result<Self> {
        let home = match (plan.strategy.is_local(), home) {
            (true, Some(h)) if (h as u64) < plan.strategy.level().group_count() => h,
            (true, Some(h)) => {
                return Err(Error::param(format!(
                    "home group {h} out of range for {}",
                    plan.strategy.level()
                )))
            }
            (true, None) => {
                return Err(Error::param(format!(
                    "{} needs a home subnet",
                    plan.strategy
                )))
            }
            (false, _) => 0,
        };
        Ok(ScannerState {
            plan,
            home,
            phase: MssPhase::RandomPhase,
            cursor: 0,
            rng,
        })
    }

    /// Home subnet of a scanner sitting at `host`.
    pub fn home_of(plan: &ScanPlan, host: Address) -> u32 {
        host.group(plan.strategy.level())
    }

    pub fn phase(&self) -> MssPhase {
        self.phase
    }

    /// Next address the sequential phase will emit.
    pub fn cursor(&self) -> Address {
        Address(self.cursor)
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    #[inline]
    fn within(level: PrefixLevel, base: u32, offset: u32) -> u32 {
        base | (offset & level.offset_mask())
    }

    /// Draws one scan target.
    #[inline]
    pub fn next_target(&mut self) -> Address {
        let raw = match &self.plan.law {
            Law::Uniform => self.rng.next_u32(),
            Law::Weighted { level, table } => {
                let g = table.sample(&mut self.rng) as u32;
                Self::within(*level, level.base_of(g), self.rng.next_u32())
            }
            Law::Fixed { level, group } => {
                Self::within(*level, level.base_of(*group), self.rng.next_u32())
            }
            Law::Local { level, p_a } => {
                if self.rng.random::<f64>() < *p_a {
                    Self::within(*level, level.base_of(self.home), self.rng.next_u32())
                } else {
                    self.rng.next_u32()
                }
            }
            Law::TwoLevel { p_b, p_c } => {
                let u = self.rng.random::<f64>();
                if u < *p_b {
                    ((self.home >> 8) << 24) | (self.rng.next_u32() & 0x00ff_ffff)
                } else if u < p_b + p_c {
                    (self.home << 16) | (self.rng.next_u32() & 0xffff)
                } else {
                    self.rng.next_u32()
                }
            }
            Law::Sequential { level } => match self.phase {
                MssPhase::RandomPhase => self.rng.next_u32(),
                MssPhase::SequentialPhase => {
                    let t = self.cursor;
                    self.cursor = Self::advance(*level, t);
                    t
                }
            },
        };
        Address(raw)
    }

    #[inline]
    fn advance(level: PrefixLevel, addr: u32) -> u32 {
        let mask = level.offset_mask();
        (addr & !mask) | (addr.wrapping_add(1) & mask)
    }

    /// Tells the scanner its last target was vulnerable. Only a modified
    /// sequential scanner in its random phase reacts: it switches, once, to
    /// sequential scanning from `hit + 1` inside `hit`'s block.
    pub fn on_hit(&mut self, hit: Address) {
        if let Law::Sequential { level } = &self.plan.law {
            if self.phase == MssPhase::RandomPhase {
                self.phase = MssPhase::SequentialPhase;
                self.cursor = Self::advance(*level, hit.0);
            }
        }
    }
}
