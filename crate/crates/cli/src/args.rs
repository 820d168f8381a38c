use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "wormscan",
    version,
    about = "Vulnerable-host non-uniformity and scanning-worm analytics"
)]
pub struct Cli {
    /// Directory for result files; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for Monte Carlo and propagation (0 = all cores).
    /// Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy and non-uniformity profiles of a host list or distribution.
    Analyze(AnalyzeArgs),
    /// Closed-form infection rates for a set of scanning strategies.
    Rates(RatesArgs),
    /// Monte Carlo early-stage estimation or full-outbreak propagation.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Proactive-protection thresholds and the IPv6 importance-scanning rate.
    Defense(DefenseArgs),
    /// Synthetic distributions and host lists.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Host list (one IPv4 address per line) or distribution CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Deepest prefix level in the profiles (capped at a distribution's own level).
    #[arg(long, default_value_t = 32)]
    pub l_max: u8,
    /// Levels that get a full entropy report [default: 8,16, skipping
    /// levels finer than a distribution input].
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimeUnit {
    Second,
    Minute,
}

impl TimeUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Second => "second",
            TimeUnit::Minute => "minute",
        }
    }
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Host list or distribution CSV. Omit when injecting beta values.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Strategy spec, repeatable. Defaults to the six reference strategies.
    #[arg(long = "strategy", value_name = "SPEC")]
    pub strategies: Vec<String>,
    /// Scans per time unit.
    #[arg(long)]
    pub s: f64,
    /// Vulnerable population; overrides the input's host count.
    #[arg(long = "N", alias = "n")]
    pub n: Option<u64>,
    #[arg(long)]
    pub beta8: Option<f64>,
    #[arg(long)]
    pub beta16: Option<f64>,
    /// Largest /16 share, for optimal importance scanning.
    #[arg(long)]
    pub maxp: Option<f64>,
    /// Unit of `s`, used in the rate column header.
    #[arg(long, value_enum, default_value_t = TimeUnit::Second)]
    pub unit: TimeUnit,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Host-level Monte Carlo estimate of the early-stage infection rate.
    Early(EarlyArgs),
    /// Discrete-time per-subnet propagation.
    Epidemic(EpidemicArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MssModeArg {
    Full,
    SecondStage,
}

#[derive(Debug, Args)]
pub struct EarlyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub s: f64,
    /// Scans per run.
    #[arg(long, default_value_t = 1_000)]
    pub scans: u64,
    #[arg(long, default_value_t = 10_000)]
    pub runs: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MssModeArg::SecondStage)]
    pub mss_mode: MssModeArg,
    /// MSS only: sweep these scan budgets from a random start instead.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Vec<u64>,
    /// Include every run's hit count in the JSON.
    #[arg(long)]
    pub per_run: bool,
}

#[derive(Debug, Args)]
pub struct EpidemicArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub strategy: String,
    /// Scans per time unit per infected host.
    #[arg(long)]
    pub s: f64,
    /// Tick length in the unit of `s`.
    #[arg(long)]
    pub tick: f64,
    /// Number of ticks.
    #[arg(long)]
    pub horizon: u64,
    /// Level a host-list input is aggregated to (raised to the strategy's level).
    #[arg(long, default_value_t = 16)]
    pub level: u8,
    /// Subnet index of the first infected host; defaults to the densest subnet.
    #[arg(long)]
    pub initial_group: Option<u32>,
    /// Fraction of hosts under proactive protection.
    #[arg(long, requires = "pp_p")]
    pub pp_d: Option<f64>,
    /// Per-attempt success probability against a protected host.
    #[arg(long, requires = "pp_d")]
    pub pp_p: Option<f64>,
    /// Also write per-subnet infected counts.
    #[arg(long)]
    pub subnets: bool,
    /// Accepted for a uniform command shape; propagation is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DefenseArgs {
    /// Non-uniformity factor the defense has to offset.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Deployment ratio to evaluate.
    #[arg(long)]
    pub d: Option<f64>,
    /// Protection success probability to evaluate.
    #[arg(long)]
    pub p: Option<f64>,
    /// Step of the deployment-ratio sweep in the requirement curve.
    #[arg(long, default_value_t = 0.01)]
    pub d_step: f64,
    /// Report the IPv6 importance-scanning rate.
    #[arg(long)]
    pub ipv6: bool,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long = "N", alias = "n")]
    pub n: Option<f64>,
    /// Non-uniformity of the population over /64 subnets.
    #[arg(long)]
    pub beta32: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// The first `occupied` subnets hold `per_group` hosts each.
    Uniform {
        #[arg(long)]
        occupied: u64,
        #[arg(long)]
        level: u8,
        #[arg(long)]
        per_group: u64,
    },
    /// Power-law shares over a shuffled set of subnets.
    Zipf {
        #[arg(long)]
        level: u8,
        #[arg(long)]
        exponent: f64,
        #[arg(long = "N", alias = "n")]
        n: u64,
        #[arg(long)]
        seed: u64,
    },
    /// /16 distribution clustered into a few /8 blocks.
    Clustered {
        #[arg(long)]
        blocks: u32,
        #[arg(long)]
        per_block: u32,
        #[arg(long, default_value_t = 0.0)]
        exponent: f64,
        #[arg(long = "N", alias = "n")]
        n: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Concrete addresses for a distribution.
    Hosts {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}
