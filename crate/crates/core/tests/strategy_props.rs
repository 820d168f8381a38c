use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wormscan::addrspace::{synth_clustered, synth_zipf, ClusterSpec};
use wormscan::rates::{alpha_for, collision_probability, ScanContext};
use wormscan::strategies::{group_scan_distribution, MssPhase, ScanPlan, ScannerState};
use wormscan::{Address, GroupDistribution, PrefixLevel, ScanStrategy};

fn clustered(seed: u64) -> GroupDistribution {
    synth_clustered(ClusterSpec {
        blocks: 20,
        subnets_per_block: 30,
        exponent: 0.8,
        hosts: 200_000,
        seed,
    })
    .unwrap()
}

fn strategies_at(l: u8) -> Vec<ScanStrategy> {
    let l = PrefixLevel::of(l);
    vec![
        ScanStrategy::random(),
        ScanStrategy::importance(l),
        ScanStrategy::optimal_importance(l),
        ScanStrategy::localized(l, 0.75).unwrap(),
    ]
}

fn neumaier(xs: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scan_vectors_are_distributions(seed in any::<u64>(), l in 1u8..=16, pa in 0.0f64..=1.0, pb in 0.0f64..0.5, pc in 0.0f64..0.5) {
        let d = synth_zipf(PrefixLevel::of(16), 1.0, 100_000, seed).unwrap();
        let home = (seed % 65_536) as u32;
        let mut all = strategies_at(l);
        all.push(ScanStrategy::localized(PrefixLevel::of(l), pa).unwrap());
        all.push(ScanStrategy::two_level(pb, pc).unwrap());
        for s in &all {
            let h = home >> (16 - s.level().get());
            let q = group_scan_distribution(s, h, Some(&d)).unwrap();
            prop_assert!(q.iter().all(|&x| x >= 0.0));
            let sum = neumaier(&q);
            prop_assert!((sum - 1.0).abs() <= 1e-12, "{s}: {sum}");
        }
    }

    #[test]
    fn localized_rate_grows_with_pa(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let d = clustered(seed);
        let ctx = ScanContext::for_distribution(100.0, &d).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r = |p| alpha_for(&ScanStrategy::localized(PrefixLevel::of(16), p).unwrap(), &ctx).unwrap().alpha;
        prop_assert!(r(lo) <= r(hi) * (1.0 + 1e-12));
        // Averaging the scan vector over a random home reproduces the closed form.
        let s = ScanStrategy::localized(PrefixLevel::of(16), hi).unwrap();
        let n = d.total() as f64;
        let mut via_vectors = 0.0;
        for (g, c) in d.nonzero() {
            let q = group_scan_distribution(&s, g, Some(&d)).unwrap();
            via_vectors += c as f64 / n * collision_probability(&d, &q).unwrap();
        }
        let p_h = alpha_for(&s, &ctx).unwrap().collision_probability;
        prop_assert!((via_vectors - p_h).abs() <= 1e-12 * p_h.max(1e-300) + 1e-15);
    }

    #[test]
    fn sequential_phase_is_a_cyclic_sweep(l in 16u8..=24, offset in any::<u32>(), seed in any::<u64>()) {
        let level = PrefixLevel::of(l);
        let d = GroupDistribution::from_pairs(level, [(level.group_of(offset), 1)]).unwrap();
        let plan = ScanPlan::new(&ScanStrategy::modified_sequential(level), &d).unwrap();
        let mut st = ScannerState::new(&plan, None, ChaCha8Rng::seed_from_u64(seed)).unwrap();
        st.on_hit(Address(offset));
        prop_assert_eq!(st.phase(), MssPhase::SequentialPhase);
        let size = level.block_size() as usize;
        let mut seen = vec![false; size];
        for _ in 0..size {
            let t = st.next_target();
            prop_assert_eq!(level.group_of(t.0), level.group_of(offset));
            let i = (t.0 & level.offset_mask()) as usize;
            prop_assert!(!seen[i]);
            seen[i] = true;
        }
        // The next sweep starts where the first did.
        prop_assert_eq!(st.next_target(), Address(level.base_of(level.group_of(offset)) | (offset.wrapping_add(1) & level.offset_mask())));
    }
}

/// Empirical group frequencies against the analytic scan vector, each group
/// within 4.5 binomial standard errors (a Bonferroni-style margin over a
/// few hundred checked groups).
fn check_frequencies(
    strategy: &ScanStrategy,
    d: &GroupDistribution,
    home_host: Option<Address>,
    draws: u64,
) {
    let plan = ScanPlan::new(strategy, d).unwrap();
    let l = strategy.level();
    let home = home_host.map(|h| ScannerState::<ChaCha8Rng>::home_of(&plan, h));
    let q = group_scan_distribution(strategy, home.unwrap_or(0), Some(d)).unwrap();
    let mut st = ScannerState::new(&plan, home, ChaCha8Rng::seed_from_u64(99)).unwrap();
    let mut counts = vec![0u64; l.group_count() as usize];
    for _ in 0..draws {
        counts[st.next_target().group(l) as usize] += 1;
    }
    let n = draws as f64;
    // Groups with non-negligible mass, plus a pooled remainder.
    let mut pooled = (0.0, 0u64);
    for (g, &c) in counts.iter().enumerate() {
        if q[g] * n >= 50.0 {
            let se = (n * q[g] * (1.0 - q[g])).sqrt();
            assert!(
                (c as f64 - n * q[g]).abs() <= 4.5 * se,
                "{strategy}: group {g} saw {c}, expected {}",
                n * q[g]
            );
        } else {
            pooled.0 += q[g];
            pooled.1 += c;
        }
    }
    let se = (n * pooled.0 * (1.0 - pooled.0)).sqrt().max(1.0);
    assert!(
        (pooled.1 as f64 - n * pooled.0).abs() <= 4.5 * se,
        "{strategy}: pooled remainder"
    );
}

#[test]
fn sampled_groups_follow_the_scan_vector() {
    let d = clustered(3);
    let host = Address(d.densest_group().unwrap().0 << 16 | 77);
    let draws = 1_000_000;
    check_frequencies(
        &ScanStrategy::random(),
        &d.coarsen(PrefixLevel::of(8)).unwrap(),
        None,
        draws,
    );
    check_frequencies(
        &ScanStrategy::importance(PrefixLevel::of(16)),
        &d,
        None,
        draws,
    );
    check_frequencies(
        &ScanStrategy::optimal_importance(PrefixLevel::of(16)),
        &d,
        None,
        draws,
    );
    check_frequencies(
        &ScanStrategy::localized(PrefixLevel::of(16), 0.75).unwrap(),
        &d,
        Some(host),
        draws,
    );
    check_frequencies(
        &ScanStrategy::localized(PrefixLevel::of(8), 0.4).unwrap(),
        &d.coarsen(PrefixLevel::of(8)).unwrap(),
        Some(host),
        draws,
    );
    check_frequencies(
        &ScanStrategy::two_level(0.25, 0.5).unwrap(),
        &d,
        Some(host),
        draws,
    );
}
