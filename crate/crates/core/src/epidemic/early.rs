use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::addrspace::{aggregate, Address, HostSet};
use crate::exec::{map_indexed, Execution};
use crate::strategies::{ScanPlan, ScanStrategy, ScannerState};
use crate::{Error, Result};

/// Membership index over a host set: addresses bucketed by their top 16
/// bits, each bucket a sorted run of low halves.
#[derive(Debug, Clone)]
pub struct VulnerableIndex {
    offsets: Vec<u32>,
    low: Vec<u16>,
}

impl VulnerableIndex {
    pub fn new(hosts: &HostSet) -> Self {
        let mut offsets = vec![0u32; (1 << 16) + 1];
        for a in hosts.addresses() {
            offsets[(a.0 >> 16) as usize + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        // Host sets are sorted, so low halves arrive sorted within buckets.
        let low = hosts.addresses().iter().map(|a| a.0 as u16).collect();
        VulnerableIndex { offsets, low }
    }

    #[inline]
    pub fn contains(&self, addr: Address) -> bool {
        let g = (addr.0 >> 16) as usize;
        let (lo, hi) = (self.offsets[g] as usize, self.offsets[g + 1] as usize);
        lo != hi && self.low[lo..hi].binary_search(&(addr.0 as u16)).is_ok()
    }
}

/// How an MSS scanner starts in [`estimate_infection_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MssMode {
    /// Random phase first; the scan budget covers both stages.
    Full,
    /// Start in the sequential phase right after a hit on a random
    /// vulnerable host; only the second stage is measured.
    #[default]
    SecondStage,
}

#[derive(Debug, Clone)]
pub struct EarlyStageConfig<'a> {
    pub strategy: ScanStrategy,
    pub hosts: &'a HostSet,
    /// Scans per unit time.
    pub s: f64,
    /// Scans emitted per run.
    pub total_scans: u64,
    pub runs: u64,
    pub seed: u64,
    pub mss_mode: MssMode,
    /// Keep every run's hit count in the result.
    pub keep_per_run: bool,
}

impl<'a> EarlyStageConfig<'a> {
    pub fn new(
        strategy: ScanStrategy,
        hosts: &'a HostSet,
        s: f64,
        total_scans: u64,
        runs: u64,
        seed: u64,
    ) -> Self {
        EarlyStageConfig {
            strategy,
            hosts,
            s,
            total_scans,
            runs,
            seed,
            mss_mode: MssMode::default(),
            keep_per_run: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hosts.is_empty() {
            return Err(Error::param(
                "early-stage estimation needs at least one vulnerable host",
            ));
        }
        if self.total_scans == 0 || self.runs == 0 {
            return Err(Error::param("total_scans and runs must be at least 1"));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::param("scan rate must be positive"));
        }
        if self.runs > u32::MAX as u64 {
            return Err(Error::param("at most 2^32 - 1 runs"));
        }
        self.strategy.validate()
    }
}

/// Sample statistics of the per-run infection rate `hits * s / total_scans`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyStageResult {
    pub strategy: String,
    pub s: f64,
    pub total_scans: u64,
    pub runs: u64,
    pub seed: u64,
    pub mean_alpha: f64,
    /// Unbiased sample variance; 0 for a single run.
    pub var_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_run_hits: Option<Vec<u64>>,
}

impl EarlyStageResult {
    /// Standard error of `mean_alpha`.
    pub fn standard_error(&self) -> f64 {
        (self.var_alpha / self.runs as f64).sqrt()
    }

    fn from_hits(cfg: &EarlyStageConfig, total_scans: u64, hits: Vec<u64>) -> Self {
        let runs = hits.len() as u128;
        let sum: u128 = hits.iter().map(|&h| h as u128).sum();
        let sum_sq: u128 = hits.iter().map(|&h| (h as u128) * (h as u128)).sum();
        let scale = cfg.s / total_scans as f64;
        let mean_hits = sum as f64 / runs as f64;
        // Exact integer numerator keeps the variance independent of order.
        let var_hits = if runs > 1 {
            (runs * sum_sq - sum * sum) as f64 / (runs * (runs - 1)) as f64
        } else {
            0.0
        };
        EarlyStageResult {
            strategy: cfg.strategy.to_string(),
            s: cfg.s,
            total_scans,
            runs: hits.len() as u64,
            seed: cfg.seed,
            mean_alpha: scale * mean_hits,
            var_alpha: scale * scale * var_hits,
            per_run_hits: cfg.keep_per_run.then_some(hits),
        }
    }
}

/// The random stream for one run: ChaCha8 keyed by the master seed, with the
/// run's stream id selecting an independent keystream.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn one_run(
    plan: &ScanPlan,
    hosts: &HostSet,
    index: &VulnerableIndex,
    mss_mode: MssMode,
    total_scans: u64,
    mut rng: ChaCha8Rng,
) -> u64 {
    let strategy = plan.strategy();
    let sequential_start = matches!(strategy, ScanStrategy::ModifiedSequential { .. })
        && mss_mode == MssMode::SecondStage;
    let start = if strategy.is_local() || sequential_start {
        Some(hosts.addresses()[rng.random_range(0..hosts.len())])
    } else {
        None
    };
    let home = start.map(|h| ScannerState::<ChaCha8Rng>::home_of(plan, h));
    let mut state = ScannerState::new(plan, home, rng).expect("validated plan");
    if sequential_start {
        state.on_hit(start.expect("drawn"));
    }
    let mut hits = 0;
    for _ in 0..total_scans {
        let t = state.next_target();
        if index.contains(t) {
            hits += 1;
            state.on_hit(t);
        }
    }
    hits
}

/// Host-level Monte Carlo estimate of the early-stage infection rate.
///
/// Each run places a scanner (local strategies: at a uniformly chosen
/// vulnerable host), emits `total_scans` targets and counts every target that
/// is vulnerable, repeats included. Run `i` draws from stream `i` of the
/// master seed.
pub fn estimate_infection_rate(cfg: &EarlyStageConfig) -> Result<EarlyStageResult> {
    estimate_infection_rate_with(cfg, Execution::default())
}

pub fn estimate_infection_rate_with(
    cfg: &EarlyStageConfig,
    exec: Execution,
) -> Result<EarlyStageResult> {
    cfg.validate()?;
    let plan = ScanPlan::new(&cfg.strategy, &aggregate(cfg.hosts, cfg.strategy.level()))?;
    let index = VulnerableIndex::new(cfg.hosts);
    let hits = map_indexed(cfg.runs, exec, |run| {
        one_run(
            &plan,
            cfg.hosts,
            &index,
            cfg.mss_mode,
            cfg.total_scans,
            run_rng(cfg.seed, run),
        )
    });
    Ok(EarlyStageResult::from_hits(cfg, cfg.total_scans, hits))
}

/// Two-stage MSS from a random start, once per scan budget. Budget `b`
/// uses streams `(b << 32) | run`. `cfg.total_scans` is ignored.
pub fn estimate_mss_full(cfg: &EarlyStageConfig, budgets: &[u64]) -> Result<Vec<EarlyStageResult>> {
    estimate_mss_full_with(cfg, budgets, Execution::default())
}

pub fn estimate_mss_full_with(
    cfg: &EarlyStageConfig,
    budgets: &[u64],
    exec: Execution,
) -> Result<Vec<EarlyStageResult>> {
    if !matches!(cfg.strategy, ScanStrategy::ModifiedSequential { .. }) {
        return Err(Error::param(format!(
            "budget sweep is defined for MSS only, got {}",
            cfg.strategy
        )));
    }
    if budgets.contains(&0) {
        return Err(Error::param("scan budgets must be positive"));
    }
    let probe = EarlyStageConfig {
        total_scans: 1,
        ..cfg.clone()
    };
    probe.validate()?;
    let plan = ScanPlan::new(&cfg.strategy, &aggregate(cfg.hosts, cfg.strategy.level()))?;
    let index = VulnerableIndex::new(cfg.hosts);
    Ok(budgets
        .iter()
        .enumerate()
        .map(|(b, &budget)| {
            let hits = map_indexed(cfg.runs, exec, |run| {
                let stream = ((b as u64) << 32) | run;
                one_run(
                    &plan,
                    cfg.hosts,
                    &index,
                    MssMode::Full,
                    budget,
                    run_rng(cfg.seed, stream),
                )
            });
            EarlyStageResult::from_hits(cfg, budget, hits)
        })
        .collect())
}
