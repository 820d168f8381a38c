use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use wormscan::addrspace::{
    aggregate, ccdf, materialize_hosts, parse_host_str, synth_clustered, synth_uniform, synth_zipf,
    ClusterSpec, ParsedHosts,
};
use wormscan::epidemic::{
    estimate_infection_rate, estimate_mss_full, propagate, time_to_fraction, EarlyStageConfig,
    EarlyStageResult, EpidemicConfig, InitialInfection, MssMode, Protection,
};
use wormscan::formats::{
    is_distribution_header, read_distribution, write_ccdf, write_distribution, write_profile,
    write_rate_table, write_requirement_curve, write_trace,
};
use wormscan::infometrics::{
    beta_profile, distribution_profile, entropy_report, non_uniformity_factor, shannon_entropy,
    shannon_profile, EntropyReport,
};
use wormscan::rates::{
    alpha_for, alpha_rs, code_red_alpha_per_second, ipv6_alpha, pp_min_deployment, pp_requirement,
    rate_table, InjectedProfile, Profile, RateReport, ScanContext,
};
use wormscan::{GroupDistribution, HostSet, PrefixLevel, ScanStrategy};

use crate::args::{
    AnalyzeArgs, Cli, Command, DefenseArgs, EarlyArgs, EpidemicArgs, MssModeArg, RatesArgs,
    SimulateCommand, SynthCommand,
};
use crate::manifest::RunManifest;
use crate::CliError;

type CliResult<T = ()> = Result<T, CliError>;

pub const DEFAULT_STRATEGIES: [&str; 6] = [
    "rs",
    "optis:l=16",
    "is:l=16",
    "ls:l=16,pa=0.75",
    "2lls:pb=0.25,pc=0.5",
    "mss:l=16",
];

pub fn run(cli: &Cli, manifest: &mut RunManifest) -> CliResult {
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::input(format!("{}: {e}", cli.out.display())))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Analyze(a) => analyze(a, out, manifest),
        Command::Rates(a) => rates(a, out, manifest),
        Command::Simulate(SimulateCommand::Early(a)) => early(a, out, manifest),
        Command::Simulate(SimulateCommand::Epidemic(a)) => epidemic(a, out, manifest),
        Command::Defense(a) => defense(a, out, manifest),
        Command::Synth(c) => synth(c, out, manifest),
    }
}

fn create(out: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> CliResult {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::internal(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_with(
    out: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> wormscan::Result<()>,
) -> CliResult {
    let mut w = create(out, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

enum Input {
    Hosts(ParsedHosts),
    Dist(GroupDistribution),
}

fn load(path: &Path, manifest: &mut RunManifest) -> CliResult<Input> {
    manifest.add_input(path)?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let context = |e: wormscan::Error| {
        let mut err = CliError::from(e);
        err = match err.code {
            3 => CliError::input(format!("{}: {err}", path.display())),
            _ => err,
        };
        err
    };
    if is_distribution_header(text.lines().next().unwrap_or("")) {
        Ok(Input::Dist(
            read_distribution(text.as_bytes()).map_err(context)?,
        ))
    } else {
        Ok(Input::Hosts(parse_host_str(&text).map_err(context)?))
    }
}

fn level(l: u8) -> CliResult<PrefixLevel> {
    Ok(PrefixLevel::new(l)?)
}

fn strategy(spec: &str) -> CliResult<ScanStrategy> {
    Ok(spec.parse()?)
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    manifest: &'a RunManifest,
    hosts: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    duplicates_dropped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ignored_lines: Option<usize>,
    reports: Vec<EntropyReport>,
}

fn analyze(a: &AnalyzeArgs, out: &Path, manifest: &mut RunManifest) -> CliResult {
    let l_max = level(a.l_max)?;
    let input = load(&a.input, manifest)?;
    let at = |l: PrefixLevel| -> CliResult<GroupDistribution> {
        match &input {
            Input::Hosts(p) => Ok(aggregate(&p.hosts, l)),
            Input::Dist(d) if l <= d.level() => Ok(d.coarsen(l)?),
            Input::Dist(d) => Err(CliError::usage(format!(
                "{l} is finer than the {} input distribution",
                d.level()
            ))),
        }
    };
    let (betas, shannons) = match &input {
        Input::Hosts(p) => (
            beta_profile(&p.hosts, l_max)?,
            shannon_profile(&p.hosts, l_max)?,
        ),
        Input::Dist(d) => {
            let keep = |v: Vec<(u8, f64)>| {
                v.into_iter()
                    .filter(|(l, _)| *l <= l_max.get())
                    .collect::<Vec<_>>()
            };
            (
                keep(distribution_profile(d, |x| {
                    Ok(non_uniformity_factor(x)?.beta)
                })?),
                keep(distribution_profile(d, shannon_entropy)?),
            )
        }
    };
    write_with(out, "beta_profile.csv", |w| {
        write_profile(w, "beta", &betas)
    })?;
    write_with(out, "shannon_profile.csv", |w| {
        write_profile(w, "shannon", &shannons)
    })?;
    for l in [8u8, 16] {
        if let Ok(d) = at(PrefixLevel::of(l)) {
            write_with(out, &format!("ccdf_l{l}.csv"), |w| write_ccdf(w, &ccdf(&d)))?;
        }
    }
    let levels = match (&a.levels, &input) {
        (Some(v), _) => v.clone(),
        (None, Input::Dist(d)) => vec![8u8, 16]
            .into_iter()
            .filter(|&l| l <= d.level().get())
            .collect(),
        (None, Input::Hosts(_)) => vec![8, 16],
    };
    let reports = levels
        .iter()
        .map(|&l| Ok(entropy_report(&at(level(l)?)?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let (hosts, dups, ignored) = match &input {
        Input::Hosts(p) => (
            p.hosts.len() as u64,
            Some(p.duplicates_dropped),
            Some(p.ignored_lines),
        ),
        Input::Dist(d) => (d.total(), None, None),
    };
    write_json(
        out,
        "analyze.json",
        &AnalyzeOutput {
            manifest,
            hosts,
            duplicates_dropped: dups,
            ignored_lines: ignored,
            reports,
        },
    )
}

#[derive(Serialize)]
struct RatesOutput<'a> {
    manifest: &'a RunManifest,
    s: f64,
    n: u64,
    unit: &'static str,
    alpha_rs: f64,
    reports: Vec<RateReport>,
}

fn rates(a: &RatesArgs, out: &Path, manifest: &mut RunManifest) -> CliResult {
    let specs: Vec<&str> = if a.strategies.is_empty() {
        DEFAULT_STRATEGIES.to_vec()
    } else {
        a.strategies.iter().map(String::as_str).collect()
    };
    let strategies = specs
        .iter()
        .map(|s| strategy(s))
        .collect::<CliResult<Vec<_>>>()?;
    let injecting = a.beta8.is_some() || a.beta16.is_some() || a.maxp.is_some();
    let input = match &a.input {
        Some(p) if injecting => {
            return Err(CliError::usage(format!(
                "--beta8/--beta16/--maxp replace host data; drop --input {}",
                p.display()
            )))
        }
        Some(p) => Some(load(p, manifest)?),
        None => None,
    };
    let mut injected = InjectedProfile::new();
    if let Some(b) = a.beta8 {
        injected = injected.with_beta(PrefixLevel::of(8), b)?;
    }
    if let Some(b) = a.beta16 {
        injected = injected.with_beta(PrefixLevel::of(16), b)?;
    }
    if let Some(p) = a.maxp {
        injected = injected.with_max_share(PrefixLevel::of(16), p)?;
    }
    let (profile, n) = match &input {
        Some(Input::Hosts(p)) => (Profile::Hosts(&p.hosts), p.hosts.len() as u64),
        Some(Input::Dist(d)) => (Profile::Distribution(d), d.total()),
        None if injecting => (
            Profile::Injected(&injected),
            a.n.ok_or_else(|| CliError::usage("injected profiles need --N"))?,
        ),
        None => {
            return Err(CliError::usage(
                "give --input or the --beta8/--beta16/--maxp injection flags",
            ))
        }
    };
    let ctx = ScanContext::new(a.s, a.n.unwrap_or(n), profile)?;
    let reports = rate_table(&strategies, &ctx)?;
    write_with(out, "rates.csv", |w| {
        write_rate_table(w, &reports, a.unit.as_str())
    })?;
    write_json(
        out,
        "rates.json",
        &RatesOutput {
            manifest,
            s: ctx.s,
            n: ctx.n,
            unit: a.unit.as_str(),
            alpha_rs: alpha_rs(&ctx),
            reports,
        },
    )
}

/// Host data for the Monte Carlo engine; distributions are materialized
/// with the run seed.
fn hosts_for_early(input: Input, seed: u64) -> CliResult<(HostSet, bool)> {
    match input {
        Input::Hosts(p) => Ok((p.hosts, false)),
        Input::Dist(d) => Ok((materialize_hosts(&d, seed)?, true)),
    }
}

#[derive(Serialize)]
struct EarlyOutput<'a> {
    manifest: &'a RunManifest,
    materialized_from_distribution: bool,
    mss_mode: Option<MssMode>,
    analytic: Option<RateReport>,
    results: Vec<EarlyStageResult>,
}

fn early(a: &EarlyArgs, out: &Path, manifest: &mut RunManifest) -> CliResult {
    manifest.seed = Some(a.seed);
    let strategy = strategy(&a.strategy)?;
    let (hosts, materialized) = hosts_for_early(load(&a.input, manifest)?, a.seed)?;
    let is_mss = matches!(strategy, ScanStrategy::ModifiedSequential { .. });
    let mut cfg = EarlyStageConfig::new(strategy.clone(), &hosts, a.s, a.scans, a.runs, a.seed);
    cfg.keep_per_run = a.per_run;
    cfg.mss_mode = match a.mss_mode {
        MssModeArg::Full => MssMode::Full,
        MssModeArg::SecondStage => MssMode::SecondStage,
    };
    let ctx = ScanContext::for_hosts(a.s, &hosts)?;
    let analytic = alpha_for(&strategy, &ctx)?;
    let (results, mss_mode) = if !a.budgets.is_empty() {
        if !is_mss {
            return Err(CliError::usage("--budgets applies to mss strategies only"));
        }
        (estimate_mss_full(&cfg, &a.budgets)?, Some(MssMode::Full))
    } else {
        (
            vec![estimate_infection_rate(&cfg)?],
            is_mss.then_some(cfg.mss_mode),
        )
    };
    write_json(
        out,
        "early.json",
        &EarlyOutput {
            manifest,
            materialized_from_distribution: materialized,
            mss_mode,
            analytic: Some(analytic),
            results,
        },
    )
}

#[derive(Serialize)]
struct Milestone {
    fraction: f64,
    time: Option<f64>,
}

#[derive(Serialize)]
struct EpidemicOutput<'a> {
    manifest: &'a RunManifest,
    strategy: String,
    population: u64,
    tick: f64,
    horizon: u64,
    protection: Option<Protection>,
    final_infected: f64,
    milestones: Vec<Milestone>,
}

fn epidemic(a: &EpidemicArgs, out: &Path, manifest: &mut RunManifest) -> CliResult {
    manifest.seed = a.seed;
    let strategy = strategy(&a.strategy)?;
    let dist = match load(&a.input, manifest)? {
        Input::Hosts(p) => aggregate(&p.hosts, level(a.level)?.max(strategy.level())),
        Input::Dist(d) => d,
    };
    let mut cfg = EpidemicConfig::new(strategy.clone(), &dist, a.s, a.tick, a.horizon);
    cfg.record_subnets = a.subnets;
    if let Some(g) = a.initial_group {
        cfg.initial = InitialInfection::Group(g);
    }
    if let (Some(d), Some(p)) = (a.pp_d, a.pp_p) {
        cfg.pp = Some(Protection { d, p });
    }
    let trace = propagate(&cfg)?;
    write_with(out, "trace.csv", |w| write_trace(w, &trace))?;
    let milestones = [0.1, 0.5, 0.9, 0.99]
        .into_iter()
        .map(|f| {
            Ok(Milestone {
                fraction: f,
                time: time_to_fraction(&trace, f)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_json(
        out,
        "epidemic.json",
        &EpidemicOutput {
            manifest,
            strategy: strategy.to_string(),
            population: trace.population,
            tick: trace.tick,
            horizon: a.horizon,
            protection: cfg.pp,
            final_infected: *trace.infected.last().expect("at least one tick"),
            milestones,
        },
    )
}

#[derive(Serialize)]
struct Deployment {
    d: f64,
    p_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    /// Rate relative to random scanning at the given `(d, p)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_over_random: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sufficient: Option<bool>,
}

#[derive(Serialize)]
struct Protective {
    beta: f64,
    min_deployment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    at: Option<Deployment>,
}

#[derive(Serialize)]
struct Ipv6 {
    s: f64,
    n: f64,
    beta32: f64,
    alpha: f64,
    code_red_alpha_per_second: f64,
    exceeds_code_red: bool,
    verdict: String,
}

#[derive(Serialize)]
struct DefenseOutput<'a> {
    manifest: &'a RunManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    protection: Option<Protective>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ipv6: Option<Ipv6>,
}

fn defense(a: &DefenseArgs, out: &Path, manifest: &mut RunManifest) -> CliResult {
    if a.beta.is_none() && !a.ipv6 {
        return Err(CliError::usage(
            "give --beta for protection thresholds and/or --ipv6",
        ));
    }
    let protection = match a.beta {
        Some(beta) => {
            if !(a.d_step > 0.0 && a.d_step <= 1.0) {
                return Err(CliError::usage("--d-step must be in (0, 1]"));
            }
            let steps = (1.0 / a.d_step).round() as u64;
            let mut curve = Vec::with_capacity(steps as usize);
            for i in 1..=steps {
                let d = if i == steps { 1.0 } else { i as f64 * a.d_step };
                curve.push((d, pp_requirement(beta, d)?));
            }
            write_with(out, "pp_requirement.csv", |w| {
                write_requirement_curve(w, &curve)
            })?;
            let at = match (a.d, a.p) {
                (Some(d), p) => {
                    let p_max = pp_requirement(beta, d)?;
                    if let Some(p) = p {
                        if !(0.0..=1.0).contains(&p) {
                            return Err(CliError::usage(format!("--p {p} outside [0, 1]")));
                        }
                    }
                    Some(Deployment {
                        d,
                        p_max,
                        p,
                        rate_over_random: p.map(|p| beta * (1.0 - d + d * p)),
                        sufficient: p.map(|p| p <= p_max),
                    })
                }
                (None, Some(_)) => return Err(CliError::usage("--p needs --d")),
                (None, None) => None,
            };
            Some(Protective {
                beta,
                min_deployment: pp_min_deployment(beta)?,
                at,
            })
        }
        None => None,
    };
    let ipv6 = if a.ipv6 {
        let (Some(s), Some(n), Some(beta32)) = (a.s, a.n, a.beta32) else {
            return Err(CliError::usage("--ipv6 needs --s, --N and --beta32"));
        };
        let alpha = ipv6_alpha(s, n, beta32)?;
        let cr = code_red_alpha_per_second();
        let exceeds = alpha > cr;
        Some(Ipv6 {
            s,
            n,
            beta32,
            alpha,
            code_red_alpha_per_second: cr,
            exceeds_code_red: exceeds,
            verdict: format!(
                "{} Code Red v2 alpha={cr:e} per second",
                if exceeds {
                    "exceeds"
                } else {
                    "does not exceed"
                }
            ),
        })
    } else {
        None
    };
    write_json(
        out,
        "defense.json",
        &DefenseOutput {
            manifest,
            protection,
            ipv6,
        },
    )
}

fn synth(c: &SynthCommand, out: &Path, manifest: &mut RunManifest) -> CliResult {
    let dist = match c {
        SynthCommand::Uniform {
            occupied,
            level: l,
            per_group,
        } => synth_uniform(*occupied, level(*l)?, *per_group)?,
        SynthCommand::Zipf {
            level: l,
            exponent,
            n,
            seed,
        } => {
            manifest.seed = Some(*seed);
            synth_zipf(level(*l)?, *exponent, *n, *seed)?
        }
        SynthCommand::Clustered {
            blocks,
            per_block,
            exponent,
            n,
            seed,
        } => {
            manifest.seed = Some(*seed);
            synth_clustered(ClusterSpec {
                blocks: *blocks,
                subnets_per_block: *per_block,
                exponent: *exponent,
                hosts: *n,
                seed: *seed,
            })?
        }
        SynthCommand::Hosts { input, seed } => {
            manifest.seed = Some(*seed);
            let Input::Dist(d) = load(input, manifest)? else {
                return Err(CliError::usage("synth hosts expects a distribution CSV"));
            };
            let hosts = materialize_hosts(&d, *seed)?;
            let mut w = create(out, "hosts.txt")?;
            for a in hosts.addresses() {
                writeln!(w, "{a}")?;
            }
            w.flush()?;
            return Ok(());
        }
    };
    write_with(out, "distribution.csv", |w| write_distribution(w, &dist))
}
