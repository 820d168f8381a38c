use serde::Serialize;

use crate::addrspace::{GroupDistribution, PrefixLevel};
use crate::exec::{update_slice, Execution};
use crate::strategies::{at_level, ImportanceWeights, ScanStrategy};
use crate::{Error, Result};

/// Where the single initially infected host sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialInfection {
    /// The subnet with the most vulnerable hosts (lowest index on ties).
    #[default]
    Densest,
    Group(u32),
}

/// Proactive protection: a fraction `d` of hosts is hardened so that one
/// exploit attempt succeeds with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Protection {
    pub d: f64,
    pub p: f64,
}

impl Protection {
    /// Multiplier applied to every tick's new infections.
    pub fn factor(&self) -> f64 {
        1.0 - self.d + self.d * self.p
    }
}

#[derive(Debug, Clone)]
pub struct EpidemicConfig<'a> {
    pub strategy: ScanStrategy,
    /// Per-subnet vulnerable populations; must be at least as fine as the
    /// strategy's level.
    pub dist: &'a GroupDistribution,
    /// Scans per unit time per infected host.
    pub s: f64,
    /// Length of one tick in the same unit as `s`.
    pub tick: f64,
    pub horizon: u64,
    pub initial: InitialInfection,
    pub pp: Option<Protection>,
    /// Keep per-subnet infected counts for every tick.
    pub record_subnets: bool,
}

impl<'a> EpidemicConfig<'a> {
    pub fn new(
        strategy: ScanStrategy,
        dist: &'a GroupDistribution,
        s: f64,
        tick: f64,
        horizon: u64,
    ) -> Self {
        EpidemicConfig {
            strategy,
            dist,
            s,
            tick,
            horizon,
            initial: InitialInfection::Densest,
            pp: None,
            record_subnets: false,
        }
    }
}

/// Infected counts per tick. Index `t` is the state after `t` ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicTrace {
    pub tick: f64,
    pub population: u64,
    pub infected: Vec<f64>,
    /// Occupied subnets (at the distribution's level), ascending.
    pub groups: Vec<u32>,
    /// `subnets[t][k]` is the infected count of `groups[k]` after `t` ticks.
    pub subnets: Option<Vec<Vec<f64>>>,
}

impl EpidemicTrace {
    /// A bare total-count series, e.g. from an external model.
    pub fn from_series(tick: f64, population: u64, infected: Vec<f64>) -> Self {
        EpidemicTrace {
            tick,
            population,
            infected,
            groups: Vec::new(),
            subnets: None,
        }
    }
}

/// First time the infected count reaches `fraction * N`, linearly
/// interpolated between ticks. `None` if the horizon ends first.
pub fn time_to_fraction(trace: &EpidemicTrace, fraction: f64) -> Result<Option<f64>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param(format!("fraction {fraction} outside (0, 1]")));
    }
    let target = fraction * trace.population as f64;
    let Some(t) = trace.infected.iter().position(|&n| n >= target) else {
        return Ok(None);
    };
    if t == 0 {
        return Ok(Some(0.0));
    }
    let (a, b) = (trace.infected[t - 1], trace.infected[t]);
    Ok(Some((t as f64 - 1.0 + (target - a) / (b - a)) * trace.tick))
}

/// Extra per-address hit probability a scan gains when scanner and target
/// share a `/level` block.
#[derive(Debug)]
struct LocalComponent {
    /// For each occupied group, the index of its `/level` ancestor block.
    block_of: Vec<usize>,
    blocks: usize,
    gain: f64,
}

/// Per-address hit probabilities of one scan, decomposed by how much prefix
/// the scanner and the target share.
#[derive(Debug)]
struct FluidLaw {
    /// Probability that one scan from anywhere hits a given address of each
    /// occupied group.
    base: Vec<f64>,
    /// Ordered from the coarsest level to the finest.
    locals: Vec<LocalComponent>,
}

/// `2^-(32-l)`, the chance a uniform draw inside a `/l` block is one
/// particular address.
fn per_address(l: PrefixLevel) -> f64 {
    (-(32.0 - l.get() as f64)).exp2()
}

fn ancestors(groups: &[u32], fine: PrefixLevel, coarse: PrefixLevel) -> (Vec<usize>, usize) {
    let shift = fine.get() - coarse.get();
    let mut block_of = Vec::with_capacity(groups.len());
    let mut blocks = 0usize;
    let mut last = None;
    for &g in groups {
        let a = if shift == 32 { 0 } else { g >> shift };
        if last != Some(a) {
            blocks += 1;
            last = Some(a);
        }
        block_of.push(blocks - 1);
    }
    (block_of, blocks)
}

impl FluidLaw {
    fn new(strategy: &ScanStrategy, dist: &GroupDistribution, groups: &[u32]) -> Result<Self> {
        let fine = dist.level();
        let sl = strategy.level();
        if sl > fine {
            return Err(Error::param(format!(
                "{strategy} works at {sl} but the distribution is only {fine}"
            )));
        }
        let uniform = per_address(PrefixLevel::of(0));
        let global = |w: f64| vec![w * uniform; groups.len()];
        let local = |l: PrefixLevel, w: f64| {
            let (block_of, blocks) = ancestors(groups, fine, l);
            LocalComponent {
                block_of,
                blocks,
                gain: w * per_address(l),
            }
        };
        let targeted = |q: &dyn Fn(u32) -> f64| -> Vec<f64> {
            let shift = fine.get() - sl.get();
            groups
                .iter()
                .map(|&g| q(if shift == 32 { 0 } else { g >> shift }) * per_address(sl))
                .collect()
        };
        let law = match strategy {
            ScanStrategy::Random { .. } => FluidLaw {
                base: global(1.0),
                locals: vec![],
            },
            ScanStrategy::Importance { weights, .. } => {
                let base = match weights {
                    ImportanceWeights::HostDensity => {
                        let coarse = at_level(dist, sl)?;
                        let n = coarse.total() as f64;
                        targeted(&|a| coarse.count(a) as f64 / n)
                    }
                    ImportanceWeights::Explicit(q) => targeted(&|a| q[a as usize]),
                };
                FluidLaw {
                    base,
                    locals: vec![],
                }
            }
            ScanStrategy::OptimalImportance { .. } => {
                let (densest, _) = at_level(dist, sl)?.densest_group().expect("non-empty");
                FluidLaw {
                    base: targeted(&|a| if a == densest { 1.0 } else { 0.0 }),
                    locals: vec![],
                }
            }
            ScanStrategy::Localized { l, p_a } => FluidLaw {
                base: global(1.0 - p_a),
                locals: vec![local(*l, *p_a)],
            },
            ScanStrategy::TwoLevelLocalized { p_b, p_c } => FluidLaw {
                base: global(1.0 - p_b - p_c),
                locals: vec![
                    local(PrefixLevel::of(8), *p_b),
                    local(PrefixLevel::of(16), *p_c),
                ],
            },
            ScanStrategy::ModifiedSequential { .. } => {
                return Err(Error::Unsupported {
                    strategy: strategy.to_string(),
                    reason: "sequential scanning is stateful per host and has no fluid model"
                        .into(),
                })
            }
        };
        Ok(law)
    }
}

/// Discrete-time mean-field propagation over the occupied subnets of
/// `cfg.dist`.
///
/// Each tick every infected host sends `s * tick` scans. A susceptible
/// address escapes all of them with probability
/// `prod_classes (1 - h_class)^(scans from that class)`, where the classes
/// group scanners by how many prefix bits they share with the address and
/// `h_class` is the per-scan chance of hitting that exact address. Subnet
/// `i` then gains `(N_i - m_i) * (1 - escape)`, scaled by the protection
/// factor when present. On a uniform distribution under random scanning this
/// is exactly the scalar AAWP recursion.
pub fn propagate(cfg: &EpidemicConfig) -> Result<EpidemicTrace> {
    propagate_with(cfg, Execution::default())
}

pub fn propagate_with(cfg: &EpidemicConfig, exec: Execution) -> Result<EpidemicTrace> {
    cfg.strategy.validate()?;
    if !(cfg.tick > 0.0 && cfg.tick.is_finite()) {
        return Err(Error::param("tick must be positive"));
    }
    if cfg.horizon == 0 {
        return Err(Error::param("horizon must be at least one tick"));
    }
    if !(cfg.s > 0.0 && cfg.s.is_finite()) {
        return Err(Error::param("scan rate must be positive"));
    }
    let pp_factor = match cfg.pp {
        Some(pp) => {
            if !(0.0..=1.0).contains(&pp.d) || !(0.0..=1.0).contains(&pp.p) {
                return Err(Error::param("protection d and p must lie in [0, 1]"));
            }
            pp.factor()
        }
        None => 1.0,
    };
    let dist = cfg.dist;
    let (groups, sizes): (Vec<u32>, Vec<f64>) = dist.nonzero().map(|(g, c)| (g, c as f64)).unzip();
    if groups.is_empty() {
        return Err(Error::param("propagation needs a non-empty distribution"));
    }
    let start = match cfg.initial {
        InitialInfection::Densest => dist.densest_group().expect("non-empty").0,
        InitialInfection::Group(g) => g,
    };
    let start_idx = groups
        .binary_search(&start)
        .map_err(|_| Error::param(format!("initial subnet {start} holds no vulnerable hosts")))?;
    let law = FluidLaw::new(&cfg.strategy, dist, &groups)?;

    let scans = cfg.s * cfg.tick;
    let mut m = vec![0.0; groups.len()];
    m[start_idx] = 1.0;
    let mut infected = Vec::with_capacity(cfg.horizon as usize + 1);
    let mut subnets = cfg.record_subnets.then(Vec::new);
    let mut block_sums: Vec<Vec<f64>> = law.locals.iter().map(|c| vec![0.0; c.blocks]).collect();
    let mut next = m.clone();

    for t in 0..=cfg.horizon {
        let n: f64 = m.iter().sum();
        infected.push(n);
        if let Some(rec) = subnets.as_mut() {
            rec.push(m.clone());
        }
        if t == cfg.horizon {
            break;
        }
        for (comp, sums) in law.locals.iter().zip(block_sums.iter_mut()) {
            sums.iter_mut().for_each(|x| *x = 0.0);
            for (k, &mk) in m.iter().enumerate() {
                sums[comp.block_of[k]] += mk;
            }
        }
        let m_ref = &m;
        let sums_ref = &block_sums;
        update_slice(&mut next, exec, |k, out| {
            // Scanners outside every local block first, then each nested
            // block; the hit chance grows with every shared level.
            let mut h = law.base[k];
            let mut outside = n;
            let mut log_escape = 0.0;
            for (comp, sums) in law.locals.iter().zip(sums_ref) {
                let inside = sums[comp.block_of[k]];
                let c = (outside - inside).max(0.0);
                if c > 0.0 && h > 0.0 {
                    log_escape += c * (-h).ln_1p();
                }
                outside = inside;
                h += comp.gain;
            }
            if outside > 0.0 && h > 0.0 {
                log_escape += outside * (-h).ln_1p();
            }
            let fresh = (sizes[k] - m_ref[k]) * -(scans * log_escape).exp_m1();
            *out = (m_ref[k] + fresh * pp_factor).min(sizes[k]);
        });
        std::mem::swap(&mut m, &mut next);
    }

    Ok(EpidemicTrace {
        tick: cfg.tick,
        population: dist.total(),
        infected,
        groups,
        subnets,
    })
}
