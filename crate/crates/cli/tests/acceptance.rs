//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{even_split, host_set, one_child, FAMILIES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use wormscan::addrspace::{
    aggregate, materialize_hosts, synth_clustered, synth_uniform, synth_zipf, ClusterSpec,
};
use wormscan::epidemic::{
    estimate_infection_rate, estimate_mss_full, propagate, time_to_fraction, EarlyStageConfig,
    EpidemicConfig,
};
use wormscan::infometrics::{
    entropy_report, l2_distance_to_uniform, non_uniformity_factor, renyi_entropy, shannon_entropy,
};
use wormscan::rates::{
    alpha_for, alpha_rs, code_red_alpha_per_second, ipv6_alpha, pp_min_deployment, pp_requirement,
    ScanContext, CODE_RED_POPULATION, CODE_RED_SCANS_PER_MINUTE,
};
use wormscan::{GroupDistribution, PrefixLevel, ScanStrategy};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_wormscan")
}

fn wormscan(args: &[&str]) -> Result<(), String> {
    let st = Command::new(bin())
        .args(args)
        .status()
        .map_err(|e| e.to_string())?;
    if st.success() {
        Ok(())
    } else {
        Err(format!("`wormscan {}` exited with {st}", args.join(" ")))
    }
}

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn l16() -> PrefixLevel {
    PrefixLevel::of(16)
}

fn table_reproduction(tmp: &Path) -> Outcome {
    let out = tmp.join("c1");
    wormscan(&[
        "--out",
        out.to_str().unwrap(),
        "rates",
        "--s",
        "100",
        "--N",
        "448894",
        "--beta8",
        "9.0",
        "--beta16",
        "52.2",
        "--maxp",
        "0.004115",
    ])?;
    let json: Value = serde_json::from_str(
        &fs::read_to_string(out.join("rates.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let reports = json["reports"].as_array().ok_or("no reports")?;
    let expected = [
        ("rs", 16.0, 0.0, 0.0105),
        ("optis:l=16", 7.9266, 8.0734, 2.8152),
        ("is:l=16", 10.2940, 5.7060, 0.5456),
        ("ls:l=16,pa=0.75", 10.6999, 5.3001, 0.4118),
        ("2lls:pb=0.25,pc=0.5", 11.1620, 4.8380, 0.2989),
        ("mss:l=16", 10.2940, 5.7060, 0.5456),
    ];
    let mut worst = (0.0f64, 0.0f64);
    for ((name, unc, bits, alpha), r) in expected.iter().zip(reports) {
        check(
            r["strategy"] == *name,
            format!("row order: {} vs {name}", r["strategy"]),
        )?;
        let f = |k: &str| r[k].as_f64().unwrap();
        let bit_err = (f("uncertainty") - unc)
            .abs()
            .max((f("info_bits") - bits).abs());
        let rate_err = (f("alpha") - alpha).abs();
        worst = (worst.0.max(bit_err), worst.1.max(rate_err));
        check(
            bit_err <= 0.02 && rate_err <= 0.01,
            format!("{name}: got {r}"),
        )?;
    }
    Ok(format!(
        "max |d bits| {:.4}, max |d alpha| {:.4}",
        worst.0, worst.1
    ))
}

fn monte_carlo_oracle() -> Outcome {
    let d = synth_zipf(l16(), 0.75, 450_000, 2_005).map_err(|e| e.to_string())?;
    let hosts = materialize_hosts(&d, 2_006).map_err(|e| e.to_string())?;
    let ctx = ScanContext::for_hosts(100.0, &hosts).map_err(|e| e.to_string())?;
    let cases = [
        (ScanStrategy::random(), 1_000),
        (ScanStrategy::importance(l16()), 1_000),
        (ScanStrategy::optimal_importance(l16()), 1_000),
        (ScanStrategy::localized(l16(), 0.75).unwrap(), 1_000),
        (ScanStrategy::two_level(0.25, 0.5).unwrap(), 1_000),
        (ScanStrategy::modified_sequential(l16()), 65_535),
    ];
    let mut z = Vec::new();
    for (i, (s, scans)) in cases.iter().enumerate() {
        let want = alpha_for(s, &ctx).map_err(|e| e.to_string())?.alpha;
        let cfg = EarlyStageConfig::new(s.clone(), &hosts, 100.0, *scans, 10_000, 31 + i as u64);
        let got = estimate_infection_rate(&cfg).map_err(|e| e.to_string())?;
        let score = (got.mean_alpha - want) / got.standard_error();
        z.push(format!("{s} {score:+.2}"));
        check(
            score.abs() <= 3.0,
            format!(
                "{s}: mc {} se {} analytic {want}",
                got.mean_alpha,
                got.standard_error()
            ),
        )?;
    }
    Ok(format!(
        "beta16 {:.1}; z-scores: {}",
        non_uniformity_factor(&d).unwrap().beta,
        z.join(", ")
    ))
}

fn theorem_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
    let slack = 1e-9;
    for case in 0..1_000 {
        let family = FAMILIES[case % FAMILIES.len()];
        let n = (10f64.powf(rng.random_range(0.0..=5.0)) as usize).clamp(1, 100_000);
        let hosts = host_set(family, n, rng.random());
        let ctx = format!("case {case} ({family:?}, n={n})");
        let mut prev: Option<(f64, f64)> = None;
        for l in 0..=20u8 {
            let d = aggregate(&hosts, PrefixLevel::of(l));
            let r = entropy_report(&d).map_err(|e| e.to_string())?;
            check(
                r.h0_support + slack >= r.shannon
                    && r.shannon + slack >= r.h2
                    && r.h2 + slack >= r.h_inf,
                format!("{ctx}: entropy chain at l={l}: {r:?}"),
            )?;
            check(
                rel(r.beta, (l as f64 - r.h2).exp2()),
                format!("{ctx}: beta vs 2^(l-H2) at l={l}"),
            )?;
            let l2 = l2_distance_to_uniform(&d).unwrap();
            check(
                rel(r.beta, (l as f64).exp2() * l2 + 1.0),
                format!("{ctx}: beta vs L2 at l={l}"),
            )?;
            if let Some((b0, h0)) = prev {
                check(
                    r.beta >= b0 * (1.0 - slack) && r.beta <= 2.0 * b0 * (1.0 + slack),
                    format!("{ctx}: beta step at l={l}"),
                )?;
                check(
                    r.shannon + slack >= h0 && r.shannon <= h0 + 1.0 + slack,
                    format!("{ctx}: shannon step at l={l}"),
                )?;
            }
            prev = Some((r.beta, r.shannon));
        }
        let l = rng.random_range(1..=20u8);
        let beta_at = |h: &wormscan::HostSet, l: u8| {
            non_uniformity_factor(&aggregate(h, PrefixLevel::of(l)))
                .unwrap()
                .beta
        };
        let h_at = |h: &wormscan::HostSet, l: u8| {
            shannon_entropy(&aggregate(h, PrefixLevel::of(l))).unwrap()
        };
        let even = even_split(&hosts, l);
        check(
            rel(beta_at(&even, l), beta_at(&even, l - 1)),
            format!("{ctx}: even split beta at l={l}"),
        )?;
        check(
            (h_at(&even, l) - h_at(&even, l - 1) - 1.0).abs() <= slack,
            format!("{ctx}: even split H at l={l}"),
        )?;
        let lone = one_child(&hosts, l);
        check(
            rel(beta_at(&lone, l), 2.0 * beta_at(&lone, l - 1)),
            format!("{ctx}: one child beta at l={l}"),
        )?;
        check(
            (h_at(&lone, l) - h_at(&lone, l - 1)).abs() <= slack,
            format!("{ctx}: one child H at l={l}"),
        )?;
    }
    // Chain equality holds exactly for uniform-on-support inputs.
    let u = synth_uniform(37, PrefixLevel::of(10), 9).unwrap();
    let r = entropy_report(&u).unwrap();
    check(
        (r.h0_support - r.h_inf).abs() <= slack,
        "uniform chain not tight",
    )?;
    let skew = GroupDistribution::from_pairs(PrefixLevel::of(10), [(0, 10), (1, 9)]).unwrap();
    let r = entropy_report(&skew).unwrap();
    check(
        r.h0_support > r.shannon && r.shannon > r.h2 && r.h2 > r.h_inf,
        "skewed chain should be strict",
    )?;
    check(renyi_entropy(&skew, 2.0).unwrap() == r.h2, "h2 mismatch")?;
    Ok("1000 host sets, l = 0..=20".into())
}

fn defense_thresholds() -> Outcome {
    let p = pp_requirement(50.0, 1.0).map_err(|e| e.to_string())?;
    let d = pp_min_deployment(50.0).map_err(|e| e.to_string())?;
    check((p - 0.02).abs() <= 1e-12, format!("p_max {p}"))?;
    check((d - 0.98).abs() <= 1e-12, format!("min deployment {d}"))?;
    let a6 = ipv6_alpha(4000.0, 1e8, 1e5).map_err(|e| e.to_string())?;
    let cr = code_red_alpha_per_second();
    check(
        (a6 - 2.2e-3).abs() / 2.2e-3 <= 0.03,
        format!("ipv6 alpha {a6}"),
    )?;
    check(
        a6 > cr && (cr - 5e-4).abs() / 5e-4 < 0.01,
        format!("ipv6 {a6} vs code red {cr}"),
    )?;
    Ok(format!("p_max {p}, d_min {d}, ipv6 {a6:.4e} > {cr:.2e}"))
}

fn minutes_to(
    dist: &GroupDistribution,
    s: ScanStrategy,
    fraction: f64,
    horizon: u64,
) -> Result<f64, String> {
    let tr = propagate(&EpidemicConfig::new(
        s.clone(),
        dist,
        CODE_RED_SCANS_PER_MINUTE,
        1.0,
        horizon,
    ))
    .map_err(|e| e.to_string())?;
    time_to_fraction(&tr, fraction)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("{s} did not reach {fraction} in {horizon} ticks"))
}

fn dynamics() -> Outcome {
    // (a) Scalar reduction on a uniform distribution.
    let u = synth_uniform(2_048, l16(), 100).unwrap();
    let n_total = u.total() as f64;
    let omega = 2f64.powi(32);
    let scans = 200.0;
    let tr = propagate(&EpidemicConfig::new(
        ScanStrategy::random(),
        &u,
        scans,
        1.0,
        800,
    ))
    .map_err(|e| e.to_string())?;
    let mut n = 1.0;
    for (t, got) in tr.infected.iter().enumerate() {
        check(
            (got - n).abs() <= 1e-9 * n,
            format!("(a) tick {t}: {got} vs {n}"),
        )?;
        n += (n_total - n) * -(scans * n * (-1.0 / omega).ln_1p()).exp_m1();
    }

    // (b)+(c) Code Red parameters on a clustered distribution with beta8 near 8
    // and beta16 near 150.
    let d = synth_clustered(ClusterSpec {
        blocks: 33,
        subnets_per_block: 13,
        exponent: 0.0,
        hosts: CODE_RED_POPULATION,
        seed: 80,
    })
    .map_err(|e| e.to_string())?;
    let b8 = non_uniformity_factor(&d.coarsen(PrefixLevel::of(8)).unwrap())
        .unwrap()
        .beta;
    let b16 = non_uniformity_factor(&d).unwrap().beta;
    let l8 = PrefixLevel::of(8);
    let horizon = 2_000;
    let rs = minutes_to(&d, ScanStrategy::random(), 0.99, horizon)?;
    check(
        (rs / 60.0 - 10.0).abs() <= 2.0,
        format!("(b) RS 99% at {rs:.0} min"),
    )?;
    let is16 = minutes_to(&d, ScanStrategy::importance(l16()), 0.99, horizon)?;
    let lls = minutes_to(
        &d,
        ScanStrategy::two_level(0.25, 0.5).unwrap(),
        0.99,
        horizon,
    )?;
    let ls16 = minutes_to(
        &d,
        ScanStrategy::localized(l16(), 0.75).unwrap(),
        0.99,
        horizon,
    )?;
    let is8 = minutes_to(&d, ScanStrategy::importance(l8), 0.99, horizon)?;
    let ls8 = minutes_to(
        &d,
        ScanStrategy::localized(l8, 0.75).unwrap(),
        0.99,
        horizon,
    )?;
    let times = format!(
        "IS16 {is16:.0}, 2LLS {lls:.0}, LS16 {ls16:.0}, IS8 {is8:.0}, LS8 {ls8:.0}, RS {rs:.0} min"
    );
    check(
        is16 < 60.0,
        format!("(c) /16 IS not under an hour: {times}"),
    )?;
    check(
        is16 < lls.min(ls16),
        format!("(c) /16 IS not fastest: {times}"),
    )?;
    check(
        lls.max(ls16) < is8.min(ls8),
        format!("(c) local /16 not ahead of /8: {times}"),
    )?;
    check(
        is8.max(ls8) < rs,
        format!("(c) /8 not ahead of RS: {times}"),
    )?;

    // (d) 2LLS time-to-10% across rising beta(16).
    let mut prev = f64::INFINITY;
    let mut steps = Vec::new();
    for (i, (blocks, per)) in [(32, 66), (28, 45), (21, 25), (5, 31)]
        .into_iter()
        .enumerate()
    {
        let di = synth_clustered(ClusterSpec {
            blocks,
            subnets_per_block: per,
            exponent: 0.0,
            hosts: CODE_RED_POPULATION,
            seed: 500 + i as u64,
        })
        .map_err(|e| e.to_string())?;
        let beta = non_uniformity_factor(&di).unwrap().beta;
        let t = minutes_to(
            &di,
            ScanStrategy::two_level(0.25, 0.5).unwrap(),
            0.1,
            horizon,
        )?;
        steps.push(format!("beta16 {beta:.0}: {t:.1} min"));
        check(
            t < prev,
            format!("(d) not decreasing: {}", steps.join(", ")),
        )?;
        prev = t;
    }
    Ok(format!(
        "beta8 {b8:.2}, beta16 {b16:.1}; {times}; (d) {}",
        steps.join(", ")
    ))
}

fn mss_budgets() -> Outcome {
    let d = synth_clustered(ClusterSpec {
        blocks: 28,
        subnets_per_block: 45,
        exponent: 0.0,
        hosts: 448_894,
        seed: 1,
    })
    .map_err(|e| e.to_string())?;
    let hosts = materialize_hosts(&d, 2).map_err(|e| e.to_string())?;
    let ctx = ScanContext::for_hosts(100.0, &hosts).map_err(|e| e.to_string())?;
    let cfg = EarlyStageConfig::new(
        ScanStrategy::modified_sequential(l16()),
        &hosts,
        100.0,
        1,
        100_000,
        6,
    );
    let budgets = [10, 100, 1_000, 10_000, 50_000];
    let res = estimate_mss_full(&cfg, &budgets).map_err(|e| e.to_string())?;
    let means: Vec<String> = res.iter().map(|r| format!("{:.4}", r.mean_alpha)).collect();
    let summary = format!(
        "beta16 {:.1}; means {}",
        non_uniformity_factor(&d).unwrap().beta,
        means.join(", ")
    );
    check(
        res.windows(2).all(|w| w[0].mean_alpha <= w[1].mean_alpha),
        format!("not monotone: {summary}"),
    )?;
    let rs = alpha_rs(&ctx);
    check(
        (res[0].mean_alpha - rs).abs() <= 3.0 * res[0].standard_error(),
        format!("budget 10 vs alpha_RS {rs}: {summary}"),
    )?;
    let last = res[4].mean_alpha;
    check(
        last > 0.3 && last < 0.55,
        format!("budget 50000: {summary}"),
    )?;
    Ok(summary)
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        if name != "run.json" {
            files.insert(name, fs::read(e.path()).unwrap());
        }
    }
    files
}

fn determinism(tmp: &Path) -> Outcome {
    let dist_dir = tmp.join("c7-dist");
    wormscan(&[
        "--out",
        dist_dir.to_str().unwrap(),
        "synth",
        "zipf",
        "--level",
        "16",
        "--exponent",
        "0.8",
        "--N",
        "60000",
        "--seed",
        "3",
    ])?;
    let dist = dist_dir.join("distribution.csv");
    let dist = dist.to_str().unwrap();
    let hosts_dir = tmp.join("c7-hosts");
    wormscan(&[
        "--out",
        hosts_dir.to_str().unwrap(),
        "synth",
        "hosts",
        "--input",
        dist,
        "--seed",
        "4",
    ])?;
    let hosts = hosts_dir.join("hosts.txt");
    let hosts = hosts.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "synth",
            "clustered",
            "--blocks",
            "20",
            "--per-block",
            "30",
            "--exponent",
            "0.5",
            "--N",
            "100000",
            "--seed",
            "9",
        ],
        vec!["synth", "hosts", "--input", dist, "--seed", "4"],
        vec!["analyze", "--input", hosts],
        vec!["rates", "--input", dist, "--s", "100"],
        vec![
            "simulate",
            "early",
            "--input",
            hosts,
            "--strategy",
            "2lls:pb=0.25,pc=0.5",
            "--s",
            "100",
            "--runs",
            "3000",
            "--seed",
            "17",
            "--per-run",
        ],
        vec![
            "simulate",
            "early",
            "--input",
            dist,
            "--strategy",
            "mss:l=16",
            "--s",
            "100",
            "--runs",
            "500",
            "--seed",
            "18",
            "--budgets",
            "10,1000,20000",
        ],
        vec![
            "simulate",
            "epidemic",
            "--input",
            dist,
            "--strategy",
            "ls:l=16,pa=0.5",
            "--s",
            "358",
            "--tick",
            "1",
            "--horizon",
            "600",
            "--subnets",
        ],
        vec![
            "defense", "--beta", "50", "--d", "0.99", "--p", "0.01", "--ipv6", "--s", "4000",
            "--N", "1e8", "--beta32", "1e5",
        ],
    ];
    let mut compared = 0;
    for (i, cmd) in commands.iter().enumerate() {
        let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
        for threads in ["1", "2", "4", "1"] {
            let out = tmp.join(format!("c7-{i}-{threads}-{}", reference.is_some() as u8));
            let _ = fs::remove_dir_all(&out);
            let mut args = vec!["--threads", threads, "--out", out.to_str().unwrap()];
            args.extend(cmd);
            wormscan(&args)?;
            let files = read_tree(&out);
            match &reference {
                None => reference = Some(files),
                Some(r) => {
                    check(
                        r == &files,
                        format!("`{}` differs at --threads {threads}", cmd.join(" ")),
                    )?;
                    compared += files.len();
                }
            }
        }
    }
    Ok(format!(
        "{} commands, {compared} file comparisons byte-identical",
        commands.len()
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        (
            "1 analytical rate table",
            Box::new(|| table_reproduction(tmp.path())),
        ),
        (
            "2 Monte Carlo oracle equivalence",
            Box::new(monte_carlo_oracle),
        ),
        ("3 theorem property suites", Box::new(theorem_suites)),
        ("4 defense thresholds", Box::new(defense_thresholds)),
        ("5 dynamics magnitude and ordering", Box::new(dynamics)),
        ("6 MSS budget monotonicity", Box::new(mss_budgets)),
        (
            "7 determinism across threads",
            Box::new(|| determinism(tmp.path())),
        ),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
